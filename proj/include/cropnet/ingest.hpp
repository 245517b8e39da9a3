#pragma once

// Offline fixture ingestion: daily climate JSON (parameter-keyed date->value
// maps), soil JSON-lines, satellite patch CSV, yield CSV, dataset manifest.
// Plus monthly aggregation, NDVI, windowed sample assembly and min-max
// normalization.

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropnet/errors.hpp"
#include "cropnet/tensor.hpp"

namespace cropnet {

using json = nlohmann::json;

// --- feature naming convention ---------------------------------------------

inline const std::array<std::string, 3>& satellite_band_features() {
  static const std::array<std::string, 3> names = {"sat:red", "sat:nir", "sat:blue"};
  return names;
}

inline const std::array<std::string, 3>& climate_features() {
  static const std::array<std::string, 3> names = {"clim:precip_mm", "clim:tmax_c",
                                                   "clim:srad_mj_m2"};
  return names;
}

inline const std::array<std::string, 3>& soil_features() {
  static const std::array<std::string, 3> names = {"soil:ph", "soil:organic_carbon_g_kg",
                                                   "soil:clay_pct"};
  return names;
}

// --- domain records ----------------------------------------------------------

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;
  auto operator<=>(const Date&) const = default;
};

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int year, int month) {
  static const int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return d[month - 1];
}

inline bool is_valid_date(const Date& d) {
  return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(d.year, d.month);
}

inline std::string format_yyyymmdd(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02d", d.year, d.month, d.day);
  return buf;
}

inline Date parse_yyyymmdd(const std::string& s) {
  if (s.size() != 8 || s.find_first_not_of("0123456789") != std::string::npos) {
    throw DataError("invalid date key '" + s + "' (expected YYYYMMDD)");
  }
  Date d{std::stoi(s.substr(0, 4)), std::stoi(s.substr(4, 2)), std::stoi(s.substr(6, 2))};
  if (!is_valid_date(d)) throw DataError("invalid calendar date '" + s + "'");
  return d;
}

struct DailyClimateRecord {
  std::string field_id;
  Date date;
  double precip_mm = 0.0;
  double tmax_c = 0.0;
  double srad_mj_m2 = 0.0;
  auto operator<=>(const DailyClimateRecord&) const = default;
};

struct MonthlyClimate {
  std::string field_id;
  int year = 0;
  int month = 0;
  double precip_mm = 0.0;   // monthly sum
  double tmax_c = 0.0;      // monthly mean
  double srad_mj_m2 = 0.0;  // monthly mean
  auto operator<=>(const MonthlyClimate&) const = default;
};

struct SoilRecord {
  std::string field_id;
  double ph = 0.0;
  double organic_carbon_g_kg = 0.0;
  double clay_pct = 0.0;
  auto operator<=>(const SoilRecord&) const = default;
};

struct SatellitePatch {
  std::string field_id;
  int year = 0;
  int month = 0;
  Tensor bands;  // [H x W x 3], channel order (red, nir, blue)

  bool operator==(const SatellitePatch& o) const {
    return field_id == o.field_id && year == o.year && month == o.month &&
           bands.shape == o.bands.shape && bands.values == o.bands.values;
  }
};

struct YieldRecord {
  std::string field_id;
  int year = 0;
  double yield_t_ha = 0.0;
  auto operator<=>(const YieldRecord&) const = default;
};

struct DatasetManifest {
  std::size_t patch_h = 0;
  std::size_t patch_w = 0;
  std::vector<int> season_months = {6, 7, 8, 9, 10};
  std::vector<int> years;
  std::vector<std::string> fields;
};

struct Timestep {
  int year = 0;
  int month = 0;
  SatellitePatch patch;
  std::vector<double> env;  // [precip, tmax, srad, ph, organic_carbon, clay]
};

struct FieldSample {
  std::string field_id;
  int harvest_year = 0;
  int window_years = 1;
  std::vector<Timestep> timesteps;  // chronological, T == window_years * season length
  SoilRecord soil;
  double yield_t_ha = 0.0;
};

struct SkipRecord {
  std::string field_id;
  int harvest_year = 0;
  std::string reason;
};

struct AssembleResult {
  std::vector<FieldSample> samples;
  std::vector<SkipRecord> skips;
};

// --- io helpers --------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failure: " + path.string());
  return os.str();
}

/// Writes via a temp file in the same directory, then renames into place.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + tmp.string());
    out << content;
    if (!out) throw IoError("write failure: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string());
}

/// Shortest round-trip decimal representation.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw DataError("cannot parse number '" + s + "' in " + context);
  }
  return v;
}

inline long parse_int(const std::string& s, const std::string& context) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("cannot parse integer '" + s + "' in " + context);
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline json parse_json_text(const std::string& text, const std::string& context) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed JSON in " + context);
  return j;
}

// --- climate fixture ---------------------------------------------------------

inline constexpr double kMissingSentinel = -999.0;

namespace detail {
inline const json& require_key(const json& j, const std::string& key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError("missing key '" + key + "' in " + context);
  return *it;
}
}  // namespace detail

/// Parses one field's daily climate fixture. Layout mirrors a daily-point API
/// response: { "field_id": str, "parameters": { PARAM: { "YYYYMMDD": value } } }.
inline std::vector<DailyClimateRecord> parse_climate_daily(const std::filesystem::path& path) {
  const std::string context = path.string();
  const json j = parse_json_text(read_text_file(path), context);
  const std::string field_id = detail::require_key(j, "field_id", context).get<std::string>();
  const json& params = detail::require_key(j, "parameters", context);

  static const char* kPrecip = "PRECTOTCORR";
  static const char* kTmax = "T2M_MAX";
  static const char* kSrad = "ALLSKY_SFC_SW_DWN";

  std::map<std::string, std::array<double, 3>> by_date;
  std::set<std::string> dates;
  const char* names[3] = {kPrecip, kTmax, kSrad};
  for (int p = 0; p < 3; ++p) {
    const json& m = detail::require_key(params, names[p], context);
    for (auto it = m.begin(); it != m.end(); ++it) {
      dates.insert(it.key());
      by_date[it.key()][p] = it.value().get<double>();
    }
  }
  // every date must be present in all three parameter maps
  for (int p = 0; p < 3; ++p) {
    const json& m = detail::require_key(params, names[p], context);
    for (const std::string& d : dates) {
      if (!m.contains(d)) {
        throw DataError("parameter " + std::string(names[p]) + " missing date " + d + " in " +
                        context);
      }
    }
  }

  std::vector<DailyClimateRecord> out;
  out.reserve(dates.size());
  for (const std::string& key : dates) {
    const auto& vals = by_date[key];
    for (int p = 0; p < 3; ++p) {
      if (vals[p] == kMissingSentinel) {
        throw DataError("missing-value sentinel -999 for " + std::string(names[p]) + " on date " +
                        key + " in " + context);
      }
    }
    DailyClimateRecord rec;
    rec.field_id = field_id;
    rec.date = parse_yyyymmdd(key);
    rec.precip_mm = vals[0];
    rec.tmax_c = vals[1];
    rec.srad_mj_m2 = vals[2];
    if (rec.precip_mm < 0.0) throw DataError("negative precipitation on " + key + " in " + context);
    if (rec.srad_mj_m2 < 0.0) throw DataError("negative solar radiation on " + key + " in " + context);
    out.push_back(std::move(rec));
  }
  return out;
}

/// Inverse of parse_climate_daily; all records must share one field id.
inline void write_climate_daily(const std::filesystem::path& path, const std::string& field_id,
                                const std::vector<DailyClimateRecord>& records) {
  json precip = json::object(), tmax = json::object(), srad = json::object();
  for (const auto& r : records) {
    const std::string key = format_yyyymmdd(r.date);
    precip[key] = r.precip_mm;
    tmax[key] = r.tmax_c;
    srad[key] = r.srad_mj_m2;
  }
  json j;
  j["field_id"] = field_id;
  j["parameters"] = {{"PRECTOTCORR", precip}, {"T2M_MAX", tmax}, {"ALLSKY_SFC_SW_DWN", srad}};
  atomic_write_file(path, j.dump(2) + "\n");
}

/// Groups by (field, year, month); precipitation is summed, temperature and
/// radiation are averaged. Output sorted; bit-exact under input reordering.
inline std::vector<MonthlyClimate> aggregate_monthly(std::vector<DailyClimateRecord> records) {
  std::sort(records.begin(), records.end());
  std::vector<MonthlyClimate> out;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    MonthlyClimate m;
    m.field_id = records[i].field_id;
    m.year = records[i].date.year;
    m.month = records[i].date.month;
    double tsum = 0.0, ssum = 0.0;
    while (j < records.size() && records[j].field_id == m.field_id &&
           records[j].date.year == m.year && records[j].date.month == m.month) {
      m.precip_mm += records[j].precip_mm;
      tsum += records[j].tmax_c;
      ssum += records[j].srad_mj_m2;
      ++j;
    }
    const double n = static_cast<double>(j - i);
    m.tmax_c = tsum / n;
    m.srad_mj_m2 = ssum / n;
    out.push_back(std::move(m));
    i = j;
  }
  return out;
}

// --- soil fixture --------------------------------------------------------------

inline void validate_soil(const SoilRecord& r) {
  if (!(r.ph > 0.0 && r.ph < 14.0)) {
    throw DataError("soil ph out of range (0,14) for field " + r.field_id + ": " +
                    fmt_double(r.ph));
  }
  if (r.organic_carbon_g_kg < 0.0) {
    throw DataError("negative organic carbon for field " + r.field_id);
  }
  if (!(r.clay_pct >= 0.0 && r.clay_pct <= 100.0)) {
    throw DataError("clay percentage out of range [0,100] for field " + r.field_id + ": " +
                    fmt_double(r.clay_pct));
  }
}

/// JSON-lines, one record per line: { field_id, phh2o, soc, clay }.
inline std::vector<SoilRecord> parse_soil(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<SoilRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string context = path.string() + ":" + std::to_string(lineno);
    const json j = parse_json_text(line, context);
    SoilRecord r;
    r.field_id = detail::require_key(j, "field_id", context).get<std::string>();
    r.ph = detail::require_key(j, "phh2o", context).get<double>();
    r.organic_carbon_g_kg = detail::require_key(j, "soc", context).get<double>();
    r.clay_pct = detail::require_key(j, "clay", context).get<double>();
    validate_soil(r);
    if (!seen.insert(r.field_id).second) {
      throw DataError("duplicate soil record for field " + r.field_id + " at " + context);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_soil(const std::filesystem::path& path, const std::vector<SoilRecord>& records) {
  std::ostringstream os;
  for (const auto& r : records) {
    json j;
    j["field_id"] = r.field_id;
    j["phh2o"] = r.ph;
    j["soc"] = r.organic_carbon_g_kg;
    j["clay"] = r.clay_pct;
    os << j.dump() << "\n";
  }
  atomic_write_file(path, os.str());
}

// --- satellite fixture -----------------------------------------------------------

inline std::string satellite_csv_header(std::size_t h, std::size_t w) {
  std::ostringstream os;
  os << "field_id,year,month,band";
  for (std::size_t i = 0; i < h * w; ++i) os << ",p" << i;
  return os.str();
}

/// CSV of per-band pixel rows: field_id,year,month,band,p0..p{H*W-1}.
/// Bands red/nir/blue must each appear exactly once per (field, year, month).
inline std::vector<SatellitePatch> parse_satellite_csv(const std::filesystem::path& path,
                                                       const DatasetManifest& manifest) {
  const std::size_t h = manifest.patch_h, w = manifest.patch_w;
  const std::size_t npix = h * w;
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty satellite fixture: " + path.string());
  if (line != satellite_csv_header(h, w)) {
    throw DataError("unexpected satellite CSV header in " + path.string() + " (expected " +
                    std::to_string(4 + npix) + " columns for a " + std::to_string(h) + "x" +
                    std::to_string(w) + " patch)");
  }

  static const std::map<std::string, std::size_t> kBandIndex = {
      {"red", 0}, {"nir", 1}, {"blue", 2}};

  std::map<std::tuple<std::string, int, int>, std::array<std::vector<double>, 3>> groups;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string context = path.string() + ":" + std::to_string(lineno);
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 4 + npix) {
      throw DataError("row width " + std::to_string(cells.size()) + " != expected " +
                      std::to_string(4 + npix) + " at " + context);
    }
    const std::string& field = cells[0];
    const int year = static_cast<int>(parse_int(cells[1], context));
    const int month = static_cast<int>(parse_int(cells[2], context));
    const auto band_it = kBandIndex.find(cells[3]);
    if (band_it == kBandIndex.end()) {
      throw DataError("unknown band '" + cells[3] + "' at " + context);
    }
    std::vector<double> pixels(npix);
    for (std::size_t i = 0; i < npix; ++i) {
      pixels[i] = parse_double(cells[4 + i], context);
      if (!(pixels[i] >= 0.0 && pixels[i] <= 1.0)) {
        throw DataError("reflectance " + cells[4 + i] + " out of [0,1] at " + context);
      }
    }
    auto& group = groups[{field, year, month}];
    if (!group[band_it->second].empty()) {
      throw DataError("duplicate band '" + cells[3] + "' for " + field + " " +
                      std::to_string(year) + "-" + std::to_string(month) + " at " + context);
    }
    group[band_it->second] = std::move(pixels);
  }

  std::vector<SatellitePatch> out;
  out.reserve(groups.size());
  for (const auto& [key, bands] : groups) {
    static const char* kNames[3] = {"red", "nir", "blue"};
    for (std::size_t b = 0; b < 3; ++b) {
      if (bands[b].empty()) {
        throw DataError("missing band '" + std::string(kNames[b]) + "' for " + std::get<0>(key) +
                        " " + std::to_string(std::get<1>(key)) + "-" +
                        std::to_string(std::get<2>(key)) + " in " + path.string());
      }
    }
    SatellitePatch p;
    p.field_id = std::get<0>(key);
    p.year = std::get<1>(key);
    p.month = std::get<2>(key);
    p.bands = Tensor({h, w, 3});
    for (std::size_t i = 0; i < npix; ++i) {
      for (std::size_t b = 0; b < 3; ++b) p.bands.values[i * 3 + b] = bands[b][i];
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_satellite_csv(const std::filesystem::path& path,
                                const std::vector<SatellitePatch>& patches) {
  if (patches.empty()) throw DataError("write_satellite_csv: no patches");
  const std::size_t h = patches.front().bands.shape[0];
  const std::size_t w = patches.front().bands.shape[1];
  std::ostringstream os;
  os << satellite_csv_header(h, w) << "\n";
  static const char* kNames[3] = {"red", "nir", "blue"};
  for (const auto& p : patches) {
    for (std::size_t b = 0; b < 3; ++b) {
      os << p.field_id << ',' << p.year << ',' << p.month << ',' << kNames[b];
      for (std::size_t i = 0; i < h * w; ++i) os << ',' << fmt_double(p.bands.values[i * 3 + b]);
      os << "\n";
    }
  }
  atomic_write_file(path, os.str());
}

// --- yields ------------------------------------------------------------------

inline std::vector<YieldRecord> parse_yield_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "field_id,year,yield_t_ha") {
    throw DataError("unexpected yield CSV header in " + path.string());
  }
  std::vector<YieldRecord> out;
  std::set<std::pair<std::string, int>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string context = path.string() + ":" + std::to_string(lineno);
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw DataError("expected 3 columns at " + context);
    YieldRecord r;
    r.field_id = cells[0];
    r.year = static_cast<int>(parse_int(cells[1], context));
    r.yield_t_ha = parse_double(cells[2], context);
    if (r.yield_t_ha < 0.0) throw DataError("negative yield at " + context);
    if (!seen.insert({r.field_id, r.year}).second) {
      throw DataError("duplicate yield for " + r.field_id + " " + std::to_string(r.year) + " at " +
                      context);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_yield_csv(const std::filesystem::path& path,
                            const std::vector<YieldRecord>& records) {
  std::ostringstream os;
  os << "field_id,year,yield_t_ha\n";
  for (const auto& r : records) {
    os << r.field_id << ',' << r.year << ',' << fmt_double(r.yield_t_ha) << "\n";
  }
  atomic_write_file(path, os.str());
}

// --- manifest ------------------------------------------------------------------

inline DatasetManifest parse_manifest(const std::filesystem::path& path) {
  const std::string context = path.string();
  const json j = parse_json_text(read_text_file(path), context);
  DatasetManifest m;
  m.patch_h = detail::require_key(j, "patch_h", context).get<std::size_t>();
  m.patch_w = detail::require_key(j, "patch_w", context).get<std::size_t>();
  m.season_months = detail::require_key(j, "season_months", context).get<std::vector<int>>();
  m.years = detail::require_key(j, "years", context).get<std::vector<int>>();
  m.fields = detail::require_key(j, "fields", context).get<std::vector<std::string>>();
  if (m.patch_h == 0 || m.patch_w == 0) throw DataError("manifest patch dims must be positive");
  if (m.season_months.empty()) throw DataError("manifest season_months empty");
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json j;
  j["patch_h"] = m.patch_h;
  j["patch_w"] = m.patch_w;
  j["season_months"] = m.season_months;
  j["years"] = m.years;
  j["fields"] = m.fields;
  atomic_write_file(path, j.dump(2) + "\n");
}

// --- NDVI -----------------------------------------------------------------------

/// Per-pixel (NIR - Red) / (NIR + Red + eps); output in [-1, 1].
inline Tensor compute_ndvi(const SatellitePatch& patch) {
  const std::size_t h = patch.bands.shape[0], w = patch.bands.shape[1];
  Tensor out({h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    const double red = patch.bands.values[i * 3 + 0];
    const double nir = patch.bands.values[i * 3 + 1];
    out.values[i] = (nir - red) / (nir + red + 1e-9);
  }
  return out;
}

// --- sample assembly ---------------------------------------------------------------

/// Builds one sample per (field, harvest_year) yield record whose window is
/// fully covered; incomplete combinations are skipped and reported.
inline AssembleResult assemble_samples(const std::vector<SatellitePatch>& patches,
                                       const std::vector<MonthlyClimate>& monthly,
                                       const std::vector<SoilRecord>& soils,
                                       const std::vector<YieldRecord>& yields, int window_years,
                                       const DatasetManifest& manifest) {
  if (window_years < 1 || window_years > 5) {
    throw ConfigError("window_years must be in 1..5, got " + std::to_string(window_years));
  }
  std::map<std::tuple<std::string, int, int>, const SatellitePatch*> patch_at;
  for (const auto& p : patches) patch_at[{p.field_id, p.year, p.month}] = &p;
  std::map<std::tuple<std::string, int, int>, const MonthlyClimate*> climate_at;
  for (const auto& c : monthly) climate_at[{c.field_id, c.year, c.month}] = &c;
  std::map<std::string, const SoilRecord*> soil_of;
  for (const auto& s : soils) soil_of[s.field_id] = &s;

  std::vector<YieldRecord> sorted_yields = yields;
  std::sort(sorted_yields.begin(), sorted_yields.end());

  AssembleResult result;
  for (const auto& y : sorted_yields) {
    const auto soil_it = soil_of.find(y.field_id);
    if (soil_it == soil_of.end()) {
      result.skips.push_back({y.field_id, y.year, "missing soil record"});
      continue;
    }
    FieldSample sample;
    sample.field_id = y.field_id;
    sample.harvest_year = y.year;
    sample.window_years = window_years;
    sample.soil = *soil_it->second;
    sample.yield_t_ha = y.yield_t_ha;
    std::string missing;
    for (int yr = y.year - window_years + 1; yr <= y.year && missing.empty(); ++yr) {
      for (int mo : manifest.season_months) {
        const auto pit = patch_at.find({y.field_id, yr, mo});
        if (pit == patch_at.end()) {
          missing = "missing patch " + std::to_string(yr) + "-" + std::to_string(mo);
          break;
        }
        const auto cit = climate_at.find({y.field_id, yr, mo});
        if (cit == climate_at.end()) {
          missing = "missing climate " + std::to_string(yr) + "-" + std::to_string(mo);
          break;
        }
        Timestep t;
        t.year = yr;
        t.month = mo;
        t.patch = *pit->second;
        t.env = {cit->second->precip_mm,
                 cit->second->tmax_c,
                 cit->second->srad_mj_m2,
                 sample.soil.ph,
                 sample.soil.organic_carbon_g_kg,
                 sample.soil.clay_pct};
        sample.timesteps.push_back(std::move(t));
      }
    }
    if (!missing.empty()) {
      result.skips.push_back({y.field_id, y.year, missing});
      continue;
    }
    result.samples.push_back(std::move(sample));
  }
  return result;
}

// --- dataset directory layout --------------------------------------------------

/// Fixture bundle under one directory: manifest.json, soil.jsonl,
/// satellite.csv, yield.csv, climate/<field_id>.json.
struct Dataset {
  DatasetManifest manifest;
  std::vector<SatellitePatch> patches;
  std::vector<MonthlyClimate> monthly;
  std::vector<SoilRecord> soils;
  std::vector<YieldRecord> yields;
};

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = parse_manifest(dir / "manifest.json");
  ds.patches = parse_satellite_csv(dir / "satellite.csv", ds.manifest);
  ds.soils = parse_soil(dir / "soil.jsonl");
  ds.yields = parse_yield_csv(dir / "yield.csv");
  std::vector<DailyClimateRecord> daily;
  for (const std::string& field : ds.manifest.fields) {
    auto recs = parse_climate_daily(dir / "climate" / (field + ".json"));
    daily.insert(daily.end(), recs.begin(), recs.end());
  }
  ds.monthly = aggregate_monthly(std::move(daily));
  return ds;
}

// --- normalization -----------------------------------------------------------------

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
  bool degenerate() const { return max == min; }
};

struct Normalizer {
  std::map<std::string, FeatureRange> ranges;

  double apply_value(const std::string& feature, double x) const {
    const auto it = ranges.find(feature);
    if (it == ranges.end()) throw DataError("unknown feature '" + feature + "' in normalizer");
    const FeatureRange& r = it->second;
    if (r.degenerate()) return 0.5;
    return (x - r.min) / (r.max - r.min);
  }
};

/// Per-feature min/max over all training timesteps. The yield target is left
/// in t/ha.
inline Normalizer normalize_fit(const std::vector<FieldSample>& samples) {
  if (samples.empty()) throw DataError("normalize_fit: empty training set");
  Normalizer norm;
  auto update = [&norm](const std::string& name, double v) {
    auto [it, inserted] = norm.ranges.try_emplace(name, FeatureRange{v, v});
    if (!inserted) {
      it->second.min = std::min(it->second.min, v);
      it->second.max = std::max(it->second.max, v);
    }
  };
  const auto& band_names = satellite_band_features();
  const auto& clim_names = climate_features();
  const auto& soil_names = soil_features();
  for (const auto& s : samples) {
    for (const auto& t : s.timesteps) {
      for (std::size_t b = 0; b < 3; ++b) {
        const Tensor& px = t.patch.bands;
        for (std::size_t i = 0; i < px.shape[0] * px.shape[1]; ++i) {
          update(band_names[b], px.values[i * 3 + b]);
        }
      }
      for (std::size_t f = 0; f < 3; ++f) update(clim_names[f], t.env[f]);
      for (std::size_t f = 0; f < 3; ++f) update(soil_names[f], t.env[3 + f]);
    }
  }
  return norm;
}

/// x -> (x - min) / (max - min); degenerate features map to 0.5; values outside
/// the fitted range are allowed to leave [0,1].
inline FieldSample normalize_apply(const Normalizer& norm, const FieldSample& sample) {
  FieldSample out = sample;
  const auto& band_names = satellite_band_features();
  const auto& clim_names = climate_features();
  const auto& soil_names = soil_features();
  for (auto& t : out.timesteps) {
    Tensor& px = t.patch.bands;
    for (std::size_t i = 0; i < px.shape[0] * px.shape[1]; ++i) {
      for (std::size_t b = 0; b < 3; ++b) {
        px.values[i * 3 + b] = norm.apply_value(band_names[b], px.values[i * 3 + b]);
      }
    }
    for (std::size_t f = 0; f < 3; ++f) t.env[f] = norm.apply_value(clim_names[f], t.env[f]);
    for (std::size_t f = 0; f < 3; ++f) {
      t.env[3 + f] = norm.apply_value(soil_names[f], t.env[3 + f]);
    }
  }
  return out;
}

}  // namespace cropnet
