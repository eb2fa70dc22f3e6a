// Static-motion-model Kalman filter over the sensor pose, corrected by
// periodic ICP results.
//
// State: x = [px, py, pz, qx, qy, qz, qw]. The quaternion entries are
// filtered additively like the position and renormalized after every step;
// measurements are flipped into the state's hemisphere before differencing.
// The measurement model is the identity (ICP observes the full state).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "roadreg/geometry.hpp"
#include "roadreg/kdtree.hpp"
#include "roadreg/preprocess.hpp"
#include "roadreg/registration.hpp"

namespace roadreg {

using Vector7d = Eigen::Matrix<double, 7, 1>;
using Matrix7d = Eigen::Matrix<double, 7, 7>;

struct FilterNoise {
  double q_position = 1e-4;  // m^2 per cycle
  double q_rotation = 1e-6;  // per quaternion entry per cycle
  double r_position = 0.25;  // m^2
  double r_rotation = 1e-4;
  double p0_position = 100.0;
  double p0_rotation = 0.1;
};

struct FilterState {
  Vector7d x = Vector7d::Zero();
  Matrix7d P = Matrix7d::Zero();
  Matrix7d Q = Matrix7d::Zero();
  Matrix7d R = Matrix7d::Zero();

  Pose pose() const;
};

Vector7d to_state_vector(const Pose& pose);
Pose from_state_vector(const Vector7d& x);

/// Diagonal P, Q, R from the noise settings, centered on `initial`.
FilterState make_filter_state(const Pose& initial, const FilterNoise& noise);

/// Throws ConfigError unless P, Q, R are symmetric (1e-9) with non-negative
/// eigenvalues and the quaternion block has unit norm.
void validate_filter_state(const FilterState& state);

/// x unchanged, P <- P + Q.
FilterState predict(const FilterState& state);

/// K = P (P + R)^-1, x <- x + K (z - x), Joseph-form covariance, quaternion
/// renormalized. Throws PipelineError when P + R is numerically singular.
FilterState update(const FilterState& state, const Vector7d& z);

struct CycleConfig {
  double cycle_period = 5.0;        // seconds
  std::int32_t window_frames = 2000;
  double frame_rate = 20.0;         // Hz
  /// Fewer frames than this in the window: coast instead of measuring.
  std::int32_t min_window_frames = 1000;
  /// ICP results below this fitness are rejected and the filter coasts.
  double min_fitness = 0.2;

  std::int32_t frames_per_cycle() const;
};

struct CycleOutcome {
  FilterState state;
  std::optional<IcpResult> icp;
  /// Empty when the measurement was applied; otherwise why the cycle coasted.
  std::string coast_reason;
  bool measured() const { return coast_reason.empty(); }
};

/// One localization cycle over the frames received so far: builds the trace
/// cloud from the rolling window, runs multiscale ICP seeded by the current
/// estimate, then predict + update. Any preprocessing or ICP failure, or a
/// gated result, makes the cycle predict only.
CycleOutcome run_localization_cycle(std::span<const PointCloud> frames, const KdTree& map_target,
                                    const FilterState& state, const CycleConfig& cfg,
                                    const SourceParams& source_params,
                                    const MultiscaleParams& icp_params);
CycleOutcome run_localization_cycle(std::span<const PointCloud> frames,
                                    const PointCloud& map_target, const FilterState& state,
                                    const CycleConfig& cfg, const SourceParams& source_params,
                                    const MultiscaleParams& icp_params);

}  // namespace roadreg
