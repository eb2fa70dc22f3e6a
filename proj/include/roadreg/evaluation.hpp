// Seed-sweep evaluation: registration from many random initial poses around
// a test spot, with per-seed errors and per-sensor summaries.
//
// Error table columns (one row per seed, then one summary row per sensor
// with seed = "mean", holding mean absolute errors):
//
//   sensor_id,seed,init_x,init_y,init_yaw_deg,x,y,z,yaw_deg,dx,dy,dz,d2d,
//   roll_err_deg,pitch_err_deg,yaw_err_deg,fitness,rmse,iterations,status

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "roadreg/geometry.hpp"
#include "roadreg/kdtree.hpp"
#include "roadreg/registration.hpp"

namespace roadreg {

struct LocalizationError {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double d2d = 0.0;
  /// Degrees, each in (-180, 180].
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// Translation difference estimate - truth in the map frame; angles from
/// R_truth^T * R_estimate decomposed intrinsic z-y-x.
LocalizationError pose_error(const Pose& estimate, const Pose& truth);

struct SweepParams {
  std::int32_t n_seeds = 50;
  /// Initial positions are uniform in a disc of this radius around the truth.
  double seed_radius = 15.0;
  /// Initial yaw is uniform within +/- this many degrees of the compass hint.
  double yaw_spread_deg = 45.0;
  std::uint64_t seed = 1;
};

void validate(const SweepParams& params);

struct SweepCase {
  std::string sensor_id;
  /// Preprocessed radar trace cloud, sensor frame.
  std::vector<Eigen::Vector3d> source;
  Pose truth;
  Compass heading_hint = Compass::E;
  double height_hint = 0.0;
};

struct SweepRow {
  std::string sensor_id;
  std::int32_t seed_index = 0;
  Pose init;
  /// Equal to init when registration failed.
  Pose estimate;
  LocalizationError error;
  double fitness = 0.0;
  double rmse = 0.0;
  std::int32_t iterations = 0;
  bool converged = false;
  /// Empty on success, otherwise the registration error message.
  std::string failure;
};

struct SweepSummary {
  std::string sensor_id;
  std::int32_t runs = 0;
  std::int32_t failures = 0;
  double mean_abs_dx = 0.0;
  double mean_abs_dy = 0.0;
  double mean_abs_dz = 0.0;
  double mean_d2d = 0.0;
  double mean_abs_roll = 0.0;
  double mean_abs_pitch = 0.0;
  double mean_abs_yaw = 0.0;
  /// Largest pairwise 2D distance between estimates of successful runs.
  double spread = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summaries;
};

/// Initial poses for one case: xy uniform in the disc, z = height hint,
/// yaw = hint +/- spread, zero roll and pitch. Deterministic in
/// (params.seed, case_index).
std::vector<Pose> sweep_seeds(const SweepCase& c, std::size_t case_index,
                              const SweepParams& params);

/// Runs multiscale ICP from every seed of every case. Seeds run in
/// parallel; the report does not depend on the thread count.
SweepReport run_seed_sweep(std::span<const SweepCase> cases, const KdTree& target,
                           const SweepParams& params, const MultiscaleParams& icp_params);

SweepSummary summarize(std::span<const SweepRow> rows, const std::string& sensor_id);

void write_error_table(std::ostream& out, const SweepReport& report);
/// sensor_id,seed,init_x,init_y,x,y
void write_scatter(std::ostream& out, const SweepReport& report);

}  // namespace roadreg
