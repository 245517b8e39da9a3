#pragma once

// Evaluation and explanation: regression metrics, leave-one-year-out
// cross-validation, modality ablation, historical-window sensitivity,
// attention summaries, exact modality-level Shapley values, and permutation
// importance over structured features.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cropnet/errors.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/model.hpp"
#include "cropnet/rng.hpp"
#include "cropnet/train.hpp"

namespace cropnet {

// --- metrics -----------------------------------------------------------------

struct Metrics {
  double r2 = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

inline Metrics compute_metrics(const std::vector<double>& y,
                               const std::vector<double>& y_hat) {
  if (y.size() != y_hat.size()) {
    throw DataError("compute_metrics: length mismatch");
  }
  if (y.size() < 2) {
    throw DataError("compute_metrics: need at least 2 samples");
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    const double r = y_hat[i] - y[i];
    ss_res += r * r;
    abs_sum += std::abs(r);
  }
  if (ss_tot == 0.0) {
    throw DataError("compute_metrics: zero target variance, r2 undefined");
  }
  Metrics m;
  m.r2 = 1.0 - ss_res / ss_tot;
  m.rmse = std::sqrt(ss_res / static_cast<double>(y.size()));
  m.mae = abs_sum / static_cast<double>(y.size());
  m.n = y.size();
  return m;
}

// --- leave-one-year-out cross-validation ----------------------------------------

struct FoldReport {
  int held_out_year = 0;
  Metrics metrics;
  std::vector<std::array<double, 2>> pairs;  // (y, y_hat) per held-out sample
  std::map<int, double> mean_alpha_by_month;
  Normalizer normalizer;  // fit on this fold's training samples only
};

struct LoyoResult {
  std::vector<FoldReport> folds;
  Metrics aggregate;      // unweighted mean of fold metrics; n totalled
  double pooled_r2 = 0.0; // single fit over all held-out (y, y_hat) pairs
};

namespace detail {

inline std::pair<std::vector<FieldSample>, std::vector<FieldSample>>
split_by_year(const std::vector<FieldSample>& samples, int held_out_year) {
  std::vector<FieldSample> train_set, test_set;
  for (const auto& s : samples) {
    (s.harvest_year == held_out_year ? test_set : train_set).push_back(s);
  }
  return {std::move(train_set), std::move(test_set)};
}

inline std::vector<int> distinct_harvest_years(
    const std::vector<FieldSample>& samples) {
  std::set<int> years;
  for (const auto& s : samples) years.insert(s.harvest_year);
  return {years.begin(), years.end()};
}

}  // namespace detail

/// One fold per distinct harvest year. Feature history from years before the
/// held-out harvest may appear inside training windows; only samples whose
/// harvest_year equals the held-out year are excluded. Expects samples in
/// physical units: each fold fits its own normalizer on its training split.
inline LoyoResult loyo_cv(const std::vector<FieldSample>& samples,
                          const TrainConfig& train_cfg,
                          const ModelConfig& model_cfg) {
  validate_train_config(train_cfg);
  const std::vector<int> years = detail::distinct_harvest_years(samples);
  if (years.size() < 2) {
    throw DataError("loyo_cv: need at least 2 distinct harvest years");
  }

  LoyoResult result;
  std::vector<double> pooled_y, pooled_y_hat;
  for (const int year : years) {
    auto [train_set, test_set] = detail::split_by_year(samples, year);
    for (const auto& s : train_set) {
      if (s.harvest_year == year) {
        throw DataError("loyo_cv: leak — training sample with held-out year");
      }
    }
    FoldReport fold;
    fold.held_out_year = year;
    fold.normalizer = normalize_fit(train_set);
    std::vector<FieldSample> train_n;
    train_n.reserve(train_set.size());
    for (const auto& s : train_set) {
      train_n.push_back(normalize_apply(fold.normalizer, s));
    }

    TrainConfig fold_cfg = train_cfg;
    fold_cfg.seed = derive_seed(train_cfg.seed, "fold",
                                static_cast<std::uint64_t>(year));
    auto [params, report] = train(train_n, fold_cfg, model_cfg);

    std::vector<double> y, y_hat;
    y.reserve(test_set.size());
    for (const auto& s : test_set) {
      const FieldSample sn = normalize_apply(fold.normalizer, s);
      const auto [pred, trace] = predict(params, sn, Mode::Infer, nullptr);
      y.push_back(s.yield_t_ha);
      y_hat.push_back(pred);
      fold.pairs.push_back({s.yield_t_ha, pred});
      for (std::size_t t = 0; t < trace.months.size(); ++t) {
        fold.mean_alpha_by_month[trace.months[t]] += trace.alpha.values[t];
      }
    }
    for (auto& [month, total] : fold.mean_alpha_by_month) {
      total /= static_cast<double>(test_set.size());
    }
    fold.metrics = compute_metrics(y, y_hat);
    pooled_y.insert(pooled_y.end(), y.begin(), y.end());
    pooled_y_hat.insert(pooled_y_hat.end(), y_hat.begin(), y_hat.end());
    result.folds.push_back(std::move(fold));
  }

  Metrics agg;
  for (const auto& f : result.folds) {
    agg.r2 += f.metrics.r2;
    agg.rmse += f.metrics.rmse;
    agg.mae += f.metrics.mae;
    agg.n += f.metrics.n;
  }
  const double k = static_cast<double>(result.folds.size());
  agg.r2 /= k;
  agg.rmse /= k;
  agg.mae /= k;
  result.aggregate = agg;
  result.pooled_r2 = compute_metrics(pooled_y, pooled_y_hat).r2;
  return result;
}

inline void write_metrics_json(const std::string& path,
                               const LoyoResult& result) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : result.folds) {
    folds.push_back({{"held_out_year", f.held_out_year},
                     {"r2", f.metrics.r2},
                     {"rmse", f.metrics.rmse},
                     {"mae", f.metrics.mae},
                     {"n", f.metrics.n}});
  }
  nlohmann::json j{{"r2", result.aggregate.r2},
                   {"rmse", result.aggregate.rmse},
                   {"mae", result.aggregate.mae},
                   {"n", result.aggregate.n},
                   {"pooled_r2", result.pooled_r2},
                   {"folds", folds}};
  atomic_write_file(path, j.dump(2) + "\n");
}

// --- modality ablation ------------------------------------------------------------

struct AblationRow {
  std::string label;  // +-joined modality names, or "full_framework"
  int window_years = 1;
  double mean_r2 = 0.0;
  std::vector<int> fold_years;
};

namespace detail {

inline std::vector<FieldSample> filter_harvest_years(
    const std::vector<FieldSample>& samples, const std::set<int>& keep) {
  std::vector<FieldSample> out;
  for (const auto& s : samples) {
    if (keep.count(s.harvest_year)) out.push_back(s);
  }
  return out;
}

}  // namespace detail

/// Four rows: single-season satellite-only, +climate, +soil, then the full
/// multi-year-window framework. All rows share the harvest years that are
/// assemblable at the full window, so fold membership is identical.
inline std::vector<AblationRow> ablation_study(const Dataset& ds,
                                               int full_window,
                                               const TrainConfig& train_cfg,
                                               const ModelConfig& model_cfg) {
  const auto base = assemble_samples(ds.patches, ds.monthly, ds.soils,
                                     ds.yields, 1, ds.manifest);
  const auto full = assemble_samples(ds.patches, ds.monthly, ds.soils,
                                     ds.yields, full_window, ds.manifest);
  const auto full_years_vec = detail::distinct_harvest_years(full.samples);
  const std::set<int> full_years(full_years_vec.begin(), full_years_vec.end());
  if (full_years.size() < 2) {
    throw DataError("ablation_study: need >= 2 harvest years at the full window");
  }
  const auto single = detail::filter_harvest_years(base.samples, full_years);

  struct RowSpec {
    std::string label;
    bool sat, clim, soil;
    bool use_full_window;
  };
  const RowSpec specs[] = {
      {"satellite", true, false, false, false},
      {"satellite+climate", true, true, false, false},
      {"satellite+climate+soil", true, true, true, false},
      {"full_framework", true, true, true, true},
  };

  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    ModelConfig mc = model_cfg;
    mc.use_satellite = spec.sat;
    mc.use_climate = spec.clim;
    mc.use_soil = spec.soil;
    const auto& samples = spec.use_full_window ? full.samples : single;
    const LoyoResult res = loyo_cv(samples, train_cfg, mc);
    AblationRow row;
    row.label = spec.label;
    row.window_years = spec.use_full_window ? full_window : 1;
    row.mean_r2 = res.aggregate.r2;
    for (const auto& f : res.folds) row.fold_years.push_back(f.held_out_year);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_ablation_csv(const std::string& path,
                               const std::vector<AblationRow>& rows) {
  std::string out = "modalities,mean_r2\n";
  for (const auto& r : rows) {
    out += r.label;
    out += ',';
    out += fmt_double(r.mean_r2);
    out += '\n';
  }
  atomic_write_file(path, out);
}

// --- historical-window sensitivity ---------------------------------------------

struct WindowRow {
  int window_years = 1;
  double r2 = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::string improvement;  // "Base" for w=1, else relative R2 gain vs previous
  std::vector<int> fold_years;
};

/// LOYO at every window depth 1..max_window, holding the fold layout fixed:
/// only harvest years assemblable at the deepest window participate, so rows
/// differ in feature history alone.
inline std::vector<WindowRow> window_sensitivity(const Dataset& ds,
                                                 int max_window,
                                                 const TrainConfig& train_cfg,
                                                 const ModelConfig& model_cfg) {
  if (max_window < 1 || max_window > 5) {
    throw ConfigError("window_sensitivity: max_window must be in 1..5");
  }
  const auto deepest = assemble_samples(ds.patches, ds.monthly, ds.soils,
                                        ds.yields, max_window, ds.manifest);
  const auto years_vec = detail::distinct_harvest_years(deepest.samples);
  const std::set<int> years(years_vec.begin(), years_vec.end());
  if (years.size() < 2) {
    throw DataError(
        "window_sensitivity: dataset year span too short for the deepest window");
  }

  std::vector<WindowRow> rows;
  for (int w = 1; w <= max_window; ++w) {
    const auto assembled = assemble_samples(ds.patches, ds.monthly, ds.soils,
                                            ds.yields, w, ds.manifest);
    const auto samples = detail::filter_harvest_years(assembled.samples, years);
    const LoyoResult res = loyo_cv(samples, train_cfg, model_cfg);
    WindowRow row;
    row.window_years = w;
    row.r2 = res.aggregate.r2;
    row.rmse = res.aggregate.rmse;
    row.mae = res.aggregate.mae;
    if (w == 1) {
      row.improvement = "Base";
    } else {
      const double prev = rows.back().r2;
      const double rel = 100.0 * (row.r2 - prev) / std::abs(prev);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.1f%%", rel);
      row.improvement = buf;
    }
    for (const auto& f : res.folds) row.fold_years.push_back(f.held_out_year);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_window_csv(const std::string& path,
                             const std::vector<WindowRow>& rows) {
  std::string out = "window_years,r2,rmse,mae,improvement\n";
  for (const auto& r : rows) {
    out += std::to_string(r.window_years);
    out += ',';
    out += fmt_double(r.r2);
    out += ',';
    out += fmt_double(r.rmse);
    out += ',';
    out += fmt_double(r.mae);
    out += ',';
    out += r.improvement;
    out += '\n';
  }
  atomic_write_file(path, out);
}

namespace detail {

inline std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

/// Two-series line chart (R2 and RMSE against window depth) with labeled axes.
inline void write_window_svg(const std::string& path,
                             const std::vector<WindowRow>& rows) {
  if (rows.empty()) throw DataError("write_window_svg: no rows");
  const double width = 640, height = 400;
  const double left = 70, right = 600, top = 30, bottom = 340;

  double y_min = 0.0, y_max = 0.0;
  for (const auto& r : rows) {
    y_min = std::min({y_min, r.r2, r.rmse});
    y_max = std::max({y_max, r.r2, r.rmse});
  }
  if (y_max == y_min) y_max = y_min + 1.0;
  const double pad = 0.08 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const double w_min = rows.front().window_years;
  const double w_max = rows.back().window_years;
  const auto x_of = [&](double w) {
    if (w_max == w_min) return (left + right) / 2.0;
    return left + (w - w_min) / (w_max - w_min) * (right - left);
  };
  const auto y_of = [&](double v) {
    return bottom - (v - y_min) / (y_max - y_min) * (bottom - top);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         detail::svg_coord(width) + "\" height=\"" + detail::svg_coord(height) +
         "\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  // axes
  svg += "<line x1=\"" + detail::svg_coord(left) + "\" y1=\"" +
         detail::svg_coord(bottom) + "\" x2=\"" + detail::svg_coord(right) +
         "\" y2=\"" + detail::svg_coord(bottom) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + detail::svg_coord(left) + "\" y1=\"" +
         detail::svg_coord(top) + "\" x2=\"" + detail::svg_coord(left) +
         "\" y2=\"" + detail::svg_coord(bottom) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  // x ticks: one per window row
  for (const auto& r : rows) {
    const double x = x_of(r.window_years);
    svg += "<line x1=\"" + detail::svg_coord(x) + "\" y1=\"" +
           detail::svg_coord(bottom) + "\" x2=\"" + detail::svg_coord(x) +
           "\" y2=\"" + detail::svg_coord(bottom + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_coord(x) + "\" y=\"" +
           detail::svg_coord(bottom + 20) +
           "\" font-size=\"12\" text-anchor=\"middle\">" +
           std::to_string(r.window_years) + "</text>\n";
  }
  // y ticks: 5 evenly spaced
  for (int i = 0; i <= 4; ++i) {
    const double v = y_min + (y_max - y_min) * i / 4.0;
    const double y = y_of(v);
    svg += "<line x1=\"" + detail::svg_coord(left - 5) + "\" y1=\"" +
           detail::svg_coord(y) + "\" x2=\"" + detail::svg_coord(left) +
           "\" y2=\"" + detail::svg_coord(y) + "\" stroke=\"black\"/>\n";
    char label[32];
    std::snprintf(label, sizeof(label), "%.2f", v);
    svg += "<text x=\"" + detail::svg_coord(left - 10) + "\" y=\"" +
           detail::svg_coord(y + 4) +
           "\" font-size=\"12\" text-anchor=\"end\">" + label + "</text>\n";
  }
  // axis labels
  svg += "<text x=\"" + detail::svg_coord((left + right) / 2) + "\" y=\"" +
         detail::svg_coord(height - 25) +
         "\" font-size=\"14\" text-anchor=\"middle\">window depth (years)</text>\n";
  svg += "<text x=\"18\" y=\"" + detail::svg_coord((top + bottom) / 2) +
         "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         detail::svg_coord((top + bottom) / 2) + ")\">score</text>\n";
  // series
  const struct {
    const char* name;
    const char* color;
    double WindowRow::* field;
  } series[] = {{"R2", "#1f77b4", &WindowRow::r2},
                {"RMSE (t/ha)", "#d62728", &WindowRow::rmse}};
  double legend_y = top + 10;
  for (const auto& s : series) {
    std::string points;
    for (const auto& r : rows) {
      points += detail::svg_coord(x_of(r.window_years)) + "," +
                detail::svg_coord(y_of(r.*(s.field))) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(s.color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    for (const auto& r : rows) {
      svg += "<circle cx=\"" + detail::svg_coord(x_of(r.window_years)) +
             "\" cy=\"" + detail::svg_coord(y_of(r.*(s.field))) +
             "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
    }
    svg += "<text x=\"" + detail::svg_coord(right - 110) + "\" y=\"" +
           detail::svg_coord(legend_y) + "\" font-size=\"12\" fill=\"" +
           s.color + "\">" + s.name + "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  atomic_write_file(path, svg);
}

// --- attention summary -------------------------------------------------------------

struct MonthAlpha {
  int month = 0;
  double mean_alpha = 0.0;
};

/// Attention mass per calendar month, averaged over every held-out sample
/// across folds (folds weighted by sample count).
inline std::vector<MonthAlpha> attention_summary(
    const std::vector<FoldReport>& folds) {
  std::map<int, double> total;
  std::size_t n = 0;
  for (const auto& f : folds) {
    for (const auto& [month, alpha] : f.mean_alpha_by_month) {
      total[month] += alpha * static_cast<double>(f.metrics.n);
    }
    n += f.metrics.n;
  }
  if (n == 0) throw DataError("attention_summary: no samples in fold reports");
  std::vector<MonthAlpha> rows;
  rows.reserve(total.size());
  for (const auto& [month, sum] : total) {
    rows.push_back({month, sum / static_cast<double>(n)});
  }
  return rows;
}

inline void write_attention_csv(const std::string& path,
                                const std::vector<MonthAlpha>& rows) {
  std::string out = "month,mean_alpha\n";
  for (const auto& r : rows) {
    out += std::to_string(r.month);
    out += ',';
    out += fmt_double(r.mean_alpha);
    out += '\n';
  }
  atomic_write_file(path, out);
}

// --- exact Shapley over modality coalitions -------------------------------------

/// Exact Shapley values for an n-player cooperative game. `v` holds the
/// characteristic value of every coalition indexed by player bitmask
/// (v.size() == 2^n).
inline std::vector<double> shapley_values(std::size_t n_players,
                                          const std::vector<double>& v) {
  if (n_players == 0 || n_players > 20) {
    throw ConfigError("shapley_values: n_players must be in 1..20");
  }
  if (v.size() != (std::size_t{1} << n_players)) {
    throw DataError("shapley_values: need a value for all 2^n coalitions");
  }
  std::vector<double> fact(n_players + 1, 1.0);
  for (std::size_t i = 1; i <= n_players; ++i) {
    fact[i] = fact[i - 1] * static_cast<double>(i);
  }
  std::vector<double> phi(n_players, 0.0);
  for (std::size_t i = 0; i < n_players; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < v.size(); ++mask) {
      if (mask & bit) continue;
      const std::size_t s = static_cast<std::size_t>(__builtin_popcountll(mask));
      const double weight = fact[s] * fact[n_players - s - 1] / fact[n_players];
      phi[i] += weight * (v[mask | bit] - v[mask]);
    }
  }
  return phi;
}

// Player bit assignment for the three input modalities.
inline constexpr unsigned kSatelliteBit = 1u;
inline constexpr unsigned kClimateBit = 2u;
inline constexpr unsigned kSoilBit = 4u;

struct ShapleyReport {
  double satellite = 0.0;
  double climate = 0.0;
  double soil = 0.0;
  double v_full = 0.0;
  std::array<double, 8> coalition_value{};  // indexed by modality bitmask
};

inline ShapleyReport modality_shapley(const std::array<double, 8>& v) {
  if (v[0] != 0.0) {
    throw DataError("modality_shapley: empty-coalition value must be 0");
  }
  const auto phi = shapley_values(3, {v.begin(), v.end()});
  ShapleyReport report;
  report.satellite = phi[0];
  report.climate = phi[1];
  report.soil = phi[2];
  report.v_full = v[7];
  report.coalition_value = v;
  return report;
}

/// Characteristic values for all 2^3 modality coalitions: mean LOYO R2 of a
/// model restricted to the coalition, identical folds and seeds throughout;
/// the empty coalition is fixed at 0.
inline std::array<double, 8> coalition_values(
    const std::vector<FieldSample>& samples, const TrainConfig& train_cfg,
    const ModelConfig& model_cfg) {
  std::array<double, 8> v{};
  for (unsigned mask = 1; mask < 8; ++mask) {
    ModelConfig mc = model_cfg;
    mc.use_satellite = (mask & kSatelliteBit) != 0;
    mc.use_climate = (mask & kClimateBit) != 0;
    mc.use_soil = (mask & kSoilBit) != 0;
    v[mask] = loyo_cv(samples, train_cfg, mc).aggregate.r2;
  }
  return v;
}

inline void write_shapley_json(const std::string& path,
                               const ShapleyReport& report) {
  nlohmann::json j{{"satellite", report.satellite},
                   {"climate", report.climate},
                   {"soil", report.soil},
                   {"v_full", report.v_full}};
  atomic_write_file(path, j.dump(2) + "\n");
}

// --- permutation importance --------------------------------------------------------

namespace detail {

inline std::size_t feature_env_index(const std::string& feature) {
  const auto& clim = climate_features();
  for (std::size_t i = 0; i < clim.size(); ++i) {
    if (clim[i] == feature) return i;
  }
  const auto& soil = soil_features();
  for (std::size_t i = 0; i < soil.size(); ++i) {
    if (soil[i] == feature) return clim.size() + i;
  }
  throw DataError("unknown structured feature '" + feature + "'");
}

}  // namespace detail

/// Held-out R2 after replacing `feature`'s values with those of the donor
/// sample perm[i] — the same donor at every timestep, so static features stay
/// internally consistent.
inline double permuted_r2(const ModelParams& params,
                          const std::vector<FieldSample>& samples,
                          const std::string& feature,
                          const std::vector<std::size_t>& perm) {
  if (samples.size() < 2) {
    throw DataError("permuted_r2: need at least 2 samples");
  }
  if (perm.size() != samples.size()) {
    throw DataError("permuted_r2: permutation size mismatch");
  }
  std::vector<bool> seen(samples.size(), false);
  for (const std::size_t p : perm) {
    if (p >= samples.size() || seen[p]) {
      throw DataError("permuted_r2: not a permutation");
    }
    seen[p] = true;
  }
  const std::size_t idx = detail::feature_env_index(feature);
  std::vector<double> y, y_hat;
  y.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FieldSample& donor = samples[perm[i]];
    FieldSample s = samples[i];
    if (donor.timesteps.size() != s.timesteps.size()) {
      throw DataError("permuted_r2: samples must share the window length");
    }
    for (std::size_t t = 0; t < s.timesteps.size(); ++t) {
      s.timesteps[t].env[idx] = donor.timesteps[t].env[idx];
    }
    const auto [pred, trace] = predict(params, s, Mode::Infer, nullptr);
    y.push_back(s.yield_t_ha);
    y_hat.push_back(pred);
  }
  return compute_metrics(y, y_hat).r2;
}

/// Mean drop in held-out R2 over `repeats` random permutations of one
/// structured feature. Positive values mean the model relies on the feature.
inline double permutation_importance(const ModelParams& params,
                                     const std::vector<FieldSample>& samples,
                                     const std::string& feature,
                                     std::size_t repeats, Rng& rng) {
  if (repeats < 1) {
    throw ConfigError("permutation_importance: repeats must be >= 1");
  }
  std::vector<std::size_t> identity(samples.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  const double baseline = permuted_r2(params, samples, feature, identity);
  double acc = 0.0;
  std::vector<std::size_t> perm = identity;
  for (std::size_t r = 0; r < repeats; ++r) {
    rng.shuffle(perm);
    acc += permuted_r2(params, samples, feature, perm);
  }
  return baseline - acc / static_cast<double>(repeats);
}

}  // namespace cropnet
