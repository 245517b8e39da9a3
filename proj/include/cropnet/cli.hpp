#pragma once

// Subcommand front end: one binary driving generate/train/evaluate/ablate/
// sensitivity/explain from a JSON run configuration with --set overrides.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cropnet/checkpoint.hpp"
#include "cropnet/datagen.hpp"
#include "cropnet/errors.hpp"
#include "cropnet/eval.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/model.hpp"
#include "cropnet/train.hpp"

namespace cropnet::cli {

struct EvalOptions {
  int window_years = 1;       // assembly depth for train/evaluate/ablate/explain
  int max_window = 5;         // deepest row of the window-sensitivity table
  std::string protocol = "loyo";  // evaluate: "loyo" or "checkpoint"
  std::string mode = "window";    // sensitivity: "window" or "hyper"
  std::size_t repeats = 5;        // permutation-importance repeats
  std::vector<double> lr_grid = {1e-5, 1e-4, 1e-3};
  std::vector<double> dropout_grid = {0.0, 0.1, 0.3};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir;
  std::filesystem::path checkpoint;
  GenConfig gen;
  ModelConfig model;
  TrainConfig train_cfg;
  EvalOptions eval;
};

namespace detail {

// The run config is user-facing: every key is optional except the seed and
// the two directories, and absent keys keep compiled defaults.
inline void overlay_gen(GenConfig& cfg, const nlohmann::json& j) {
  if (j.contains("n_fields")) cfg.n_fields = j.at("n_fields").get<int>();
  if (j.contains("years")) cfg.years = j.at("years").get<std::vector<int>>();
  if (j.contains("patch_h")) cfg.patch_h = j.at("patch_h").get<std::size_t>();
  if (j.contains("patch_w")) cfg.patch_w = j.at("patch_w").get<std::size_t>();
  if (j.contains("noise_sd")) cfg.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("memory_strength")) {
    cfg.memory_strength = j.at("memory_strength").get<double>();
  }
  if (j.contains("month_weights")) {
    cfg.month_weights = j.at("month_weights").get<std::vector<double>>();
  }
}

inline void overlay_model(ModelConfig& cfg, const nlohmann::json& j) {
  if (j.contains("patch_h")) cfg.patch_h = j.at("patch_h").get<std::size_t>();
  if (j.contains("patch_w")) cfg.patch_w = j.at("patch_w").get<std::size_t>();
  if (j.contains("conv_channels")) {
    cfg.conv_channels = j.at("conv_channels").get<std::array<std::size_t, 3>>();
  }
  if (j.contains("mlp_hidden")) {
    cfg.mlp_hidden = j.at("mlp_hidden").get<std::array<std::size_t, 2>>();
  }
  if (j.contains("embed_structured")) {
    cfg.embed_structured = j.at("embed_structured").get<std::size_t>();
  }
  if (j.contains("attention_dim")) {
    cfg.attention_dim = j.at("attention_dim").get<std::size_t>();
  }
  if (j.contains("head_hidden")) {
    cfg.head_hidden = j.at("head_hidden").get<std::size_t>();
  }
  if (j.contains("attention_dropout")) {
    cfg.attention_dropout = j.at("attention_dropout").get<double>();
  }
  if (j.contains("use_satellite")) cfg.use_satellite = j.at("use_satellite").get<bool>();
  if (j.contains("use_climate")) cfg.use_climate = j.at("use_climate").get<bool>();
  if (j.contains("use_soil")) cfg.use_soil = j.at("use_soil").get<bool>();
}

inline void overlay_train(TrainConfig& cfg, const nlohmann::json& j) {
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("attention_dropout")) {
    cfg.attention_dropout = j.at("attention_dropout").get<double>();
  }
  if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
}

inline void overlay_eval(EvalOptions& cfg, const nlohmann::json& j) {
  if (j.contains("window_years")) cfg.window_years = j.at("window_years").get<int>();
  if (j.contains("max_window")) cfg.max_window = j.at("max_window").get<int>();
  if (j.contains("protocol")) cfg.protocol = j.at("protocol").get<std::string>();
  if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
  if (j.contains("repeats")) cfg.repeats = j.at("repeats").get<std::size_t>();
  if (j.contains("lr_grid")) cfg.lr_grid = j.at("lr_grid").get<std::vector<double>>();
  if (j.contains("dropout_grid")) {
    cfg.dropout_grid = j.at("dropout_grid").get<std::vector<double>>();
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig rc;
  if (!j.contains("seed")) {
    throw ConfigError("config missing required field 'seed'");
  }
  rc.seed = j.at("seed").get<std::uint64_t>();
  if (!j.contains("dataset_dir")) {
    throw ConfigError("config missing required field 'dataset_dir'");
  }
  rc.dataset_dir = j.at("dataset_dir").get<std::string>();
  if (!j.contains("output_dir")) {
    throw ConfigError("config missing required field 'output_dir'");
  }
  rc.output_dir = j.at("output_dir").get<std::string>();
  rc.checkpoint = j.contains("checkpoint")
                      ? std::filesystem::path(j.at("checkpoint").get<std::string>())
                      : rc.output_dir / "checkpoint.json";
  if (j.contains("generate")) detail::overlay_gen(rc.gen, j.at("generate"));
  if (j.contains("model")) detail::overlay_model(rc.model, j.at("model"));
  if (j.contains("train")) detail::overlay_train(rc.train_cfg, j.at("train"));
  if (j.contains("eval")) detail::overlay_eval(rc.eval, j.at("eval"));
  rc.gen.seed = rc.seed;
  rc.train_cfg.seed = rc.seed;
  return rc;
}

namespace detail {

inline nlohmann::json load_config_json(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);  // IoError if unreadable
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

// --set a.b.c=value ; the value is parsed as JSON when possible, else kept
// as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) {
      throw ConfigError("--set key has an empty path segment: '" + key + "'");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline std::vector<FieldSample> assemble_at(const Dataset& ds, int window) {
  auto result = assemble_samples(ds.patches, ds.monthly, ds.soils, ds.yields,
                                 window, ds.manifest);
  if (result.samples.empty()) {
    throw DataError("no assemblable samples at window " + std::to_string(window));
  }
  return std::move(result.samples);
}

inline FoldReport whole_set_report(const ModelParams& params,
                                   const Normalizer& norm,
                                   const std::vector<FieldSample>& samples) {
  FoldReport report;
  std::vector<double> y, y_hat;
  for (const auto& s : samples) {
    const FieldSample sn = normalize_apply(norm, s);
    const auto [pred, trace] = predict(params, sn, Mode::Infer, nullptr);
    y.push_back(s.yield_t_ha);
    y_hat.push_back(pred);
    report.pairs.push_back({s.yield_t_ha, pred});
    for (std::size_t t = 0; t < trace.months.size(); ++t) {
      report.mean_alpha_by_month[trace.months[t]] += trace.alpha.values[t];
    }
  }
  for (auto& [month, total] : report.mean_alpha_by_month) {
    total /= static_cast<double>(samples.size());
  }
  report.metrics = compute_metrics(y, y_hat);
  report.normalizer = norm;
  return report;
}

}  // namespace detail

inline void cmd_generate(const RunConfig& rc) {
  generate_dataset(rc.gen, rc.dataset_dir);
}

inline void cmd_train(const RunConfig& rc) {
  const Dataset ds = load_dataset(rc.dataset_dir);
  const auto samples = detail::assemble_at(ds, rc.eval.window_years);
  const Normalizer norm = normalize_fit(samples);
  std::vector<FieldSample> normalized;
  normalized.reserve(samples.size());
  for (const auto& s : samples) normalized.push_back(normalize_apply(norm, s));

  auto [params, report] = train(normalized, rc.train_cfg, rc.model);
  std::filesystem::create_directories(rc.output_dir);
  std::filesystem::create_directories(rc.checkpoint.parent_path());
  write_checkpoint(rc.checkpoint.string(), Checkpoint{params, norm});
  report.checkpoint_path = rc.checkpoint.string();
  write_train_report((rc.output_dir / "train_report.json").string(), report);
  write_loss_csv((rc.output_dir / "loss.csv").string(), report.epoch_loss);
}

inline void cmd_evaluate(const RunConfig& rc) {
  const Dataset ds = load_dataset(rc.dataset_dir);
  const auto samples = detail::assemble_at(ds, rc.eval.window_years);
  std::filesystem::create_directories(rc.output_dir);
  if (rc.eval.protocol == "loyo") {
    const LoyoResult res = loyo_cv(samples, rc.train_cfg, rc.model);
    write_metrics_json((rc.output_dir / "metrics.json").string(), res);
    write_attention_csv((rc.output_dir / "attention.csv").string(),
                        attention_summary(res.folds));
  } else if (rc.eval.protocol == "checkpoint") {
    const Checkpoint cp = parse_checkpoint(rc.checkpoint.string());
    const FoldReport report =
        detail::whole_set_report(cp.params, cp.normalizer, samples);
    LoyoResult res;
    res.aggregate = report.metrics;
    res.pooled_r2 = report.metrics.r2;
    write_metrics_json((rc.output_dir / "metrics.json").string(), res);
    write_attention_csv((rc.output_dir / "attention.csv").string(),
                        attention_summary({report}));
  } else {
    throw ConfigError("eval.protocol must be 'loyo' or 'checkpoint', got '" +
                      rc.eval.protocol + "'");
  }
}

inline void cmd_ablate(const RunConfig& rc) {
  const Dataset ds = load_dataset(rc.dataset_dir);
  std::filesystem::create_directories(rc.output_dir);
  const auto rows =
      ablation_study(ds, rc.eval.window_years, rc.train_cfg, rc.model);
  write_ablation_csv((rc.output_dir / "ablation.csv").string(), rows);
  const auto samples = detail::assemble_at(ds, rc.eval.window_years);
  const auto v = coalition_values(samples, rc.train_cfg, rc.model);
  write_shapley_json((rc.output_dir / "shapley.json").string(),
                     modality_shapley(v));
}

inline void cmd_sensitivity(const RunConfig& rc) {
  const Dataset ds = load_dataset(rc.dataset_dir);
  std::filesystem::create_directories(rc.output_dir);
  if (rc.eval.mode == "window") {
    const auto rows =
        window_sensitivity(ds, rc.eval.max_window, rc.train_cfg, rc.model);
    write_window_csv((rc.output_dir / "window_sensitivity.csv").string(), rows);
    write_window_svg((rc.output_dir / "window_sensitivity.svg").string(), rows);
  } else if (rc.eval.mode == "hyper") {
    const auto samples = detail::assemble_at(ds, rc.eval.window_years);
    const auto evaluate = [&](const TrainConfig& cfg) -> std::array<double, 3> {
      const LoyoResult res = loyo_cv(samples, cfg, rc.model);
      return {res.aggregate.r2, res.aggregate.rmse, res.aggregate.mae};
    };
    const auto cells = sensitivity_grid(rc.eval.lr_grid, rc.eval.dropout_grid,
                                        rc.train_cfg, evaluate);
    write_sensitivity_csv((rc.output_dir / "sensitivity_grid.csv").string(),
                          cells);
  } else {
    throw ConfigError("eval.mode must be 'window' or 'hyper', got '" +
                      rc.eval.mode + "'");
  }
}

inline void cmd_explain(const RunConfig& rc) {
  const Dataset ds = load_dataset(rc.dataset_dir);
  const auto samples = detail::assemble_at(ds, rc.eval.window_years);
  const Checkpoint cp = parse_checkpoint(rc.checkpoint.string());
  std::vector<FieldSample> normalized;
  normalized.reserve(samples.size());
  for (const auto& s : samples) {
    normalized.push_back(normalize_apply(cp.normalizer, s));
  }
  Rng rng(derive_seed(rc.seed, "explain"));
  std::string out = "feature,importance\n";
  for (const auto& group : {climate_features(), soil_features()}) {
    for (const auto& feature : group) {
      const double imp = permutation_importance(cp.params, normalized, feature,
                                                rc.eval.repeats, rng);
      out += feature;
      out += ',';
      out += fmt_double(imp);
      out += '\n';
    }
  }
  std::filesystem::create_directories(rc.output_dir);
  atomic_write_file((rc.output_dir / "permutation_importance.csv").string(), out);
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{
      "attn-cropnet: attention-based multi-modal crop yield modeling on "
      "synthetic multi-source data"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  struct Sub {
    CLI::App* cmd;
    void (*fn)(const RunConfig&);
  };
  std::vector<Sub> subs;
  const auto add = [&](const std::string& name, const std::string& desc,
                       void (*fn)(const RunConfig&)) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--config", config_path, "JSON run configuration")
        ->required();
    cmd->add_option("--set", overrides,
                    "override a config key, e.g. --set train.epochs=50");
    subs.push_back({cmd, fn});
  };

  add("generate",
      "Write synthetic fixtures + ground_truth.json to dataset_dir.\n"
      "Config keys: seed, dataset_dir, generate.n_fields, generate.years, "
      "generate.patch_h, generate.patch_w, generate.noise_sd, "
      "generate.memory_strength, generate.month_weights",
      &cmd_generate);
  add("train",
      "Train on the dataset; write checkpoint, train_report.json, loss.csv.\n"
      "Config keys: seed, dataset_dir, output_dir, checkpoint, "
      "eval.window_years, model.patch_h, model.patch_w, model.conv_channels, "
      "model.mlp_hidden, model.embed_structured, model.attention_dim, "
      "model.head_hidden, model.use_satellite, model.use_climate, "
      "model.use_soil, train.learning_rate, train.epochs, train.batch_size, "
      "train.attention_dropout, train.beta1, train.beta2, train.epsilon",
      &cmd_train);
  add("evaluate",
      "Score the model; write metrics.json and attention.csv.\n"
      "Config keys: seed, dataset_dir, output_dir, checkpoint, "
      "eval.window_years, eval.protocol (loyo|checkpoint), model.*, train.*",
      &cmd_evaluate);
  add("ablate",
      "Modality ablation + exact modality Shapley; write ablation.csv and "
      "shapley.json.\n"
      "Config keys: seed, dataset_dir, output_dir, eval.window_years, "
      "model.*, train.*",
      &cmd_ablate);
  add("sensitivity",
      "Window-depth table/chart or hyper-parameter grid.\n"
      "Config keys: seed, dataset_dir, output_dir, eval.mode (window|hyper), "
      "eval.max_window, eval.window_years, eval.lr_grid, eval.dropout_grid, "
      "model.*, train.*",
      &cmd_sensitivity);
  add("explain",
      "Permutation importance of structured features; write "
      "permutation_importance.csv.\n"
      "Config keys: seed, dataset_dir, output_dir, checkpoint, "
      "eval.window_years, eval.repeats, model.*, train.*",
      &cmd_explain);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    for (const auto& sub : subs) {
      if (sub.cmd->parsed()) {
        nlohmann::json j = detail::load_config_json(config_path);
        for (const auto& assignment : overrides) {
          detail::apply_override(j, assignment);
        }
        sub.fn(parse_run_config(j));
        return 0;
      }
    }
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfig);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kIo);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
}

inline int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cropnet::cli
