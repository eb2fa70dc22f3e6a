#include "roadreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json_fields.hpp"
#include "roadreg/error.hpp"

namespace roadreg {

using detail::check_keys;
using detail::optional_json;
using detail::read_field;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

void finite_positive(double v, const std::string& name) {
  require(std::isfinite(v) && v > 0.0, name + " must be positive");
}

void finite_non_negative(double v, const std::string& name) {
  require(std::isfinite(v) && v >= 0.0, name + " must be >= 0");
}

}  // namespace

ScenarioConfig RunConfig::resolved_scenario() const {
  ScenarioConfig s = scenario;
  s.seed = seed;
  return s;
}

CycleConfig RunConfig::cycle_config(double frame_rate) const {
  CycleConfig c;
  c.cycle_period = filter.cycle_period;
  c.window_frames = preprocess.source.window_frames;
  c.frame_rate = frame_rate;
  c.min_window_frames = filter.min_window_frames;
  c.min_fitness = filter.min_fitness;
  return c;
}

SweepParams RunConfig::sweep_params() const {
  SweepParams p;
  p.n_seeds = evaluate.n_seeds;
  p.seed_radius = evaluate.seed_radius;
  p.yaw_spread_deg = evaluate.yaw_spread_deg;
  p.seed = seed;
  return p;
}

void validate(const RunConfig& cfg) {
  validate(cfg.scenario);

  const auto& src = cfg.preprocess.source;
  finite_non_negative(src.v_min, "preprocess.source.v_min");
  finite_positive(src.eps, "preprocess.source.eps");
  require(src.min_pts >= 1, "preprocess.source.min_pts must be >= 1");
  finite_positive(src.cell_size, "preprocess.source.cell_size");
  require(src.window_frames >= 1, "preprocess.source.window_frames must be >= 1");
  const auto& tgt = cfg.preprocess.target;
  finite_positive(tgt.eps, "preprocess.target.eps");
  require(tgt.min_pts >= 1, "preprocess.target.min_pts must be >= 1");
  finite_positive(tgt.cell_size, "preprocess.target.cell_size");

  const auto& reg = cfg.registration;
  finite_positive(reg.voxel, "registration.voxel");
  require(std::isfinite(reg.coarse_distance) && reg.coarse_distance >= 2.0 * reg.voxel,
          "registration.coarse_distance must be at least 2 x voxel");
  require(reg.max_iterations >= 1, "registration.max_iterations must be >= 1");
  finite_non_negative(reg.relative_tolerance, "registration.relative_tolerance");

  const auto& f = cfg.filter;
  finite_non_negative(f.noise.q_position, "filter.q_position");
  finite_non_negative(f.noise.q_rotation, "filter.q_rotation");
  finite_positive(f.noise.r_position, "filter.r_position");
  finite_positive(f.noise.r_rotation, "filter.r_rotation");
  finite_positive(f.noise.p0_position, "filter.p0_position");
  finite_positive(f.noise.p0_rotation, "filter.p0_rotation");
  finite_positive(f.cycle_period, "filter.cycle_period");
  require(f.min_window_frames >= 1, "filter.min_window_frames must be >= 1");
  require(std::isfinite(f.min_fitness) && f.min_fitness >= 0.0 && f.min_fitness <= 1.0,
          "filter.min_fitness must be in [0, 1]");
  for (const auto& s : cfg.scenario.sensors) {
    require(std::lround(f.cycle_period * s.spec.frame_rate) >= 1,
            "filter.cycle_period is shorter than one frame of " + s.id);
  }

  const auto& o = cfg.occupancy;
  require(o.window_ms >= 1, "occupancy.window_ms must be >= 1");
  require(o.finalization_lag >= 0, "occupancy.finalization_lag must be >= 0");
  require(o.horizon_windows >= 1, "occupancy.horizon_windows must be >= 1");
  if (o.filters.v_min) finite_non_negative(*o.filters.v_min, "occupancy.v_min");
  if (o.filters.z_min && o.filters.z_max) {
    require(*o.filters.z_min <= *o.filters.z_max, "occupancy.z_min must not exceed z_max");
  }
  require(o.image_width_px >= 16 && o.image_width_px <= 20000,
          "occupancy.image_width_px must be in [16, 20000]");

  try {
    validate(cfg.sweep_params());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json scenario = to_json(cfg.scenario);
  scenario.erase("seed");
  const auto& src = cfg.preprocess.source;
  const auto& tgt = cfg.preprocess.target;
  const auto& reg = cfg.registration;
  const auto& f = cfg.filter;
  const auto& o = cfg.occupancy;
  const auto& e = cfg.evaluate;
  return {
      {"seed", cfg.seed},
      {"scenario", scenario},
      {"preprocess",
       {{"source",
         {{"v_min", src.v_min},
          {"eps", src.eps},
          {"min_pts", src.min_pts},
          {"cell_size", src.cell_size},
          {"window_frames", src.window_frames}}},
        {"target", {{"eps", tgt.eps}, {"min_pts", tgt.min_pts}, {"cell_size", tgt.cell_size}}}}},
      {"registration",
       {{"voxel", reg.voxel},
        {"coarse_distance", reg.coarse_distance},
        {"max_iterations", reg.max_iterations},
        {"relative_tolerance", reg.relative_tolerance}}},
      {"filter",
       {{"q_position", f.noise.q_position},
        {"q_rotation", f.noise.q_rotation},
        {"r_position", f.noise.r_position},
        {"r_rotation", f.noise.r_rotation},
        {"p0_position", f.noise.p0_position},
        {"p0_rotation", f.noise.p0_rotation},
        {"cycle_period", f.cycle_period},
        {"min_window_frames", f.min_window_frames},
        {"min_fitness", f.min_fitness}}},
      {"occupancy",
       {{"window_ms", o.window_ms},
        {"finalization_lag", o.finalization_lag},
        {"horizon_windows", o.horizon_windows},
        {"v_min", optional_json(o.filters.v_min)},
        {"z_min", optional_json(o.filters.z_min)},
        {"z_max", optional_json(o.filters.z_max)},
        {"rcs_min", optional_json(o.filters.rcs_min)},
        {"image_width_px", o.image_width_px}}},
      {"evaluate",
       {{"n_seeds", e.n_seeds}, {"seed_radius", e.seed_radius}, {"yaw_spread_deg", e.yaw_spread_deg}}},
  };
}

RunConfig run_config_from_json(const json& j, const RunConfig& base) {
  RunConfig cfg = base;
  check_keys(j, {"seed", "scenario", "preprocess", "registration", "filter", "occupancy", "evaluate"},
             "config");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected an unsigned integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("scenario")) {
    const auto& s = j["scenario"];
    if (s.is_object() && s.contains("seed")) {
      throw ConfigError("config.scenario.seed: set the top-level seed instead");
    }
    cfg.scenario = scenario_from_json(s, cfg.scenario);
  }
  if (j.contains("preprocess")) {
    const auto& p = j["preprocess"];
    check_keys(p, {"source", "target"}, "config.preprocess");
    if (p.contains("source")) {
      const auto& s = p["source"];
      const std::string w = "config.preprocess.source";
      check_keys(s, {"v_min", "eps", "min_pts", "cell_size", "window_frames"}, w);
      auto& src = cfg.preprocess.source;
      read_field(s, "v_min", src.v_min, w);
      read_field(s, "eps", src.eps, w);
      read_field(s, "min_pts", src.min_pts, w);
      read_field(s, "cell_size", src.cell_size, w);
      read_field(s, "window_frames", src.window_frames, w);
    }
    if (p.contains("target")) {
      const auto& t = p["target"];
      const std::string w = "config.preprocess.target";
      check_keys(t, {"eps", "min_pts", "cell_size"}, w);
      auto& tgt = cfg.preprocess.target;
      read_field(t, "eps", tgt.eps, w);
      read_field(t, "min_pts", tgt.min_pts, w);
      read_field(t, "cell_size", tgt.cell_size, w);
    }
  }
  if (j.contains("registration")) {
    const auto& r = j["registration"];
    const std::string w = "config.registration";
    check_keys(r, {"voxel", "coarse_distance", "max_iterations", "relative_tolerance"}, w);
    auto& reg = cfg.registration;
    read_field(r, "voxel", reg.voxel, w);
    read_field(r, "coarse_distance", reg.coarse_distance, w);
    read_field(r, "max_iterations", reg.max_iterations, w);
    read_field(r, "relative_tolerance", reg.relative_tolerance, w);
  }
  if (j.contains("filter")) {
    const auto& f = j["filter"];
    const std::string w = "config.filter";
    check_keys(f, {"q_position", "q_rotation", "r_position", "r_rotation", "p0_position",
                   "p0_rotation", "cycle_period", "min_window_frames", "min_fitness"},
               w);
    auto& fc = cfg.filter;
    read_field(f, "q_position", fc.noise.q_position, w);
    read_field(f, "q_rotation", fc.noise.q_rotation, w);
    read_field(f, "r_position", fc.noise.r_position, w);
    read_field(f, "r_rotation", fc.noise.r_rotation, w);
    read_field(f, "p0_position", fc.noise.p0_position, w);
    read_field(f, "p0_rotation", fc.noise.p0_rotation, w);
    read_field(f, "cycle_period", fc.cycle_period, w);
    read_field(f, "min_window_frames", fc.min_window_frames, w);
    read_field(f, "min_fitness", fc.min_fitness, w);
  }
  if (j.contains("occupancy")) {
    const auto& o = j["occupancy"];
    const std::string w = "config.occupancy";
    check_keys(o, {"window_ms", "finalization_lag", "horizon_windows", "v_min", "z_min", "z_max",
                   "rcs_min", "image_width_px"},
               w);
    auto& oc = cfg.occupancy;
    read_field(o, "window_ms", oc.window_ms, w);
    read_field(o, "finalization_lag", oc.finalization_lag, w);
    read_field(o, "horizon_windows", oc.horizon_windows, w);
    read_field(o, "v_min", oc.filters.v_min, w);
    read_field(o, "z_min", oc.filters.z_min, w);
    read_field(o, "z_max", oc.filters.z_max, w);
    read_field(o, "rcs_min", oc.filters.rcs_min, w);
    read_field(o, "image_width_px", oc.image_width_px, w);
  }
  if (j.contains("evaluate")) {
    const auto& e = j["evaluate"];
    const std::string w = "config.evaluate";
    check_keys(e, {"n_seeds", "seed_radius", "yaw_spread_deg"}, w);
    read_field(e, "n_seeds", cfg.evaluate.n_seeds, w);
    read_field(e, "seed_radius", cfg.evaluate.seed_radius, w);
    read_field(e, "yaw_spread_deg", cfg.evaluate.yaw_spread_deg, w);
  }
  return cfg;
}

namespace {

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg = run_config_from_json(parse_file(path));
  validate(cfg);
  return cfg;
}

namespace {

// Leaves whose default is null but which hold a number when set.
bool is_nullable_leaf(const std::string& key) {
  return key == "occupancy.v_min" || key == "occupancy.z_min" || key == "occupancy.z_max" ||
         key == "occupancy.rcs_min" || key == "scenario.clutter.static_fraction";
}

void collect(const ordered_json& node, const std::string& prefix, std::vector<OverrideKey>& out) {
  for (const auto& item : node.items()) {
    const std::string key = prefix.empty() ? item.key() : prefix + "." + item.key();
    const auto& v = item.value();
    if (v.is_object()) {
      collect(v, key, out);
    } else if (v.is_array()) {
      continue;
    } else if (is_nullable_leaf(key)) {
      out.push_back({key, LeafType::nullable_number});
    } else if (v.is_boolean()) {
      out.push_back({key, LeafType::boolean});
    } else if (v.is_number_unsigned()) {
      out.push_back({key, LeafType::unsigned_integer});
    } else if (v.is_number_integer()) {
      out.push_back({key, LeafType::integer});
    } else if (v.is_number()) {
      out.push_back({key, LeafType::number});
    } else if (v.is_string()) {
      out.push_back({key, LeafType::string});
    }
  }
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config: --" + key + ": cannot parse '" + text + "'");
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: --" + key + ": cannot parse '" + text + "'");
}

}  // namespace

std::vector<OverrideKey> override_keys(const ordered_json& doc) {
  std::vector<OverrideKey> out;
  collect(doc, "", out);
  return out;
}

void apply_override(ordered_json& doc, const std::string& key, const std::string& value) {
  const auto keys = override_keys(doc);
  const auto it = std::find_if(keys.begin(), keys.end(),
                               [&](const OverrideKey& k) { return k.key == key; });
  if (it == keys.end()) throw ConfigError("config: unknown key '" + key + "'");
  ordered_json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  switch (it->type) {
    case LeafType::integer: *node = parse_number<std::int64_t>(key, value); break;
    case LeafType::unsigned_integer: *node = parse_number<std::uint64_t>(key, value); break;
    case LeafType::number: *node = parse_double(key, value); break;
    case LeafType::nullable_number:
      if (value == "null") {
        *node = nullptr;
      } else {
        *node = parse_double(key, value);
      }
      break;
    case LeafType::boolean:
      if (value == "true" || value == "1") {
        *node = true;
      } else if (value == "false" || value == "0") {
        *node = false;
      } else {
        throw ConfigError("config: --" + key + ": expected true or false");
      }
      break;
    case LeafType::string: *node = value; break;
  }
}

RunConfig resolve_run_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides,
                             std::optional<std::uint64_t> seed) {
  RunConfig cfg = path ? run_config_from_json(parse_file(*path)) : RunConfig{};
  if (!overrides.empty()) {
    ordered_json doc = to_json(cfg);
    for (const auto& [key, value] : overrides) apply_override(doc, key, value);
    cfg = run_config_from_json(json::parse(doc.dump()), cfg);
  }
  if (seed) cfg.seed = *seed;
  validate(cfg);
  return cfg;
}

}  // namespace roadreg
