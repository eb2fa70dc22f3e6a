// Run configuration shared by every CLI subcommand: scenario, preprocessing,
// registration, filter, occupancy and evaluation parameters, loaded from a
// JSON file over built-in defaults and adjusted by dotted-key overrides.
//
//   {
//     "seed": 1,
//     "scenario": { ... },                  see simulator.hpp
//     "preprocess": {"source": {...}, "target": {...}},
//     "registration": {"voxel": 0.5, "coarse_distance": 30, ...},
//     "filter": {"q_position": 1e-4, ..., "cycle_period": 5, ...},
//     "occupancy": {"window_ms": 50, "finalization_lag": 5, ...},
//     "evaluate": {"n_seeds": 50, "seed_radius": 15, "yaw_spread_deg": 45}
//   }
//
// Missing keys keep their defaults; unknown keys are errors. The top-level
// seed drives the simulation and the seed sweep.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadreg/evaluation.hpp"
#include "roadreg/localization_filter.hpp"
#include "roadreg/occupancy.hpp"
#include "roadreg/preprocess.hpp"
#include "roadreg/registration.hpp"
#include "roadreg/simulator.hpp"

namespace roadreg {

struct PreprocessConfig {
  SourceParams source;
  TargetParams target;
};

struct FilterConfig {
  FilterNoise noise;
  double cycle_period = 5.0;
  std::int32_t min_window_frames = 1000;
  double min_fitness = 0.2;
};

struct OccupancyConfig {
  std::int64_t window_ms = 50;
  std::int32_t finalization_lag = 5;
  std::int64_t horizon_windows = 2000;
  AssignFilters filters{0.15, std::nullopt, std::nullopt, std::nullopt};
  std::int32_t image_width_px = 1200;
};

struct EvaluateConfig {
  std::int32_t n_seeds = 50;
  double seed_radius = 15.0;
  double yaw_spread_deg = 45.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  ScenarioConfig scenario = intersection_scenario();
  PreprocessConfig preprocess;
  MultiscaleParams registration;
  FilterConfig filter;
  OccupancyConfig occupancy;
  EvaluateConfig evaluate;

  /// Scenario with the run seed applied.
  ScenarioConfig resolved_scenario() const;
  CycleConfig cycle_config(double frame_rate) const;
  SweepParams sweep_params() const;
};

/// Throws ConfigError naming the first invalid value.
void validate(const RunConfig& cfg);

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Fields missing from `j` keep the values of `base`. Does not validate.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base = RunConfig{});
/// Parses and validates a config file.
RunConfig load_run_config(const std::filesystem::path& path);

enum class LeafType { integer, unsigned_integer, number, boolean, string, nullable_number };

struct OverrideKey {
  /// Dotted path, e.g. "registration.coarse_distance".
  std::string key;
  LeafType type = LeafType::number;
};

/// Scalar leaves of a config document outside arrays, in document order.
std::vector<OverrideKey> override_keys(const nlohmann::ordered_json& doc);

/// Sets the leaf at `key` from its text form, typed by the existing leaf.
/// Nullable numbers accept "null". Throws ConfigError on unknown keys or
/// unparsable values.
void apply_override(nlohmann::ordered_json& doc, const std::string& key, const std::string& value);

/// Defaults, then the optional config file, then the dotted-key overrides in
/// order, then the seed. The result is validated.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides,
                             std::optional<std::uint64_t> seed);

}  // namespace roadreg
