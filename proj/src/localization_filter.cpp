#include "roadreg/localization_filter.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "roadreg/error.hpp"

namespace roadreg {
namespace {

void renormalize_quaternion(Vector7d& x) {
  const double n = x.tail<4>().norm();
  if (n > 0.0) x.tail<4>() /= n;
}

void check_covariance(const Matrix7d& m, const char* name) {
  if (!m.allFinite()) throw ConfigError(std::string("localization_filter: ") + name + " not finite");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigError(std::string("localization_filter: ") + name + " not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix7d> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw ConfigError(std::string("localization_filter: ") + name + " not positive semi-definite");
  }
}

}  // namespace

Pose FilterState::pose() const { return from_state_vector(x); }

Vector7d to_state_vector(const Pose& pose) {
  Vector7d x;
  x.head<3>() = pose.translation;
  const Eigen::Quaterniond q = pose.rotation.normalized();
  x(3) = q.x();
  x(4) = q.y();
  x(5) = q.z();
  x(6) = q.w();
  return x;
}

Pose from_state_vector(const Vector7d& x) {
  Pose pose;
  pose.translation = x.head<3>();
  pose.rotation = Eigen::Quaterniond(x(6), x(3), x(4), x(5)).normalized();
  return pose;
}

FilterState make_filter_state(const Pose& initial, const FilterNoise& noise) {
  FilterState s;
  s.x = to_state_vector(initial);
  Vector7d p0, q, r;
  p0 << Eigen::Vector3d::Constant(noise.p0_position), Eigen::Vector4d::Constant(noise.p0_rotation);
  q << Eigen::Vector3d::Constant(noise.q_position), Eigen::Vector4d::Constant(noise.q_rotation);
  r << Eigen::Vector3d::Constant(noise.r_position), Eigen::Vector4d::Constant(noise.r_rotation);
  s.P = p0.asDiagonal();
  s.Q = q.asDiagonal();
  s.R = r.asDiagonal();
  return s;
}

void validate_filter_state(const FilterState& state) {
  check_covariance(state.P, "P");
  check_covariance(state.Q, "Q");
  check_covariance(state.R, "R");
  if (std::abs(state.x.tail<4>().norm() - 1.0) > 1e-9) {
    throw ConfigError("localization_filter: quaternion block is not unit norm");
  }
}

FilterState predict(const FilterState& state) {
  FilterState next = state;
  next.P = state.P + state.Q;
  renormalize_quaternion(next.x);
  return next;
}

FilterState update(const FilterState& state, const Vector7d& z) {
  Vector7d measurement = z;
  if (measurement.tail<4>().dot(state.x.tail<4>()) < 0.0) {
    measurement.tail<4>() = -measurement.tail<4>();
  }

  const Matrix7d s = state.P + state.R;
  const Eigen::LLT<Matrix7d> llt(s);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-15) {
    throw PipelineError("localization_filter: innovation covariance is singular");
  }
  // K = P S^-1; with P and S symmetric, K^T = S^-1 P.
  const Matrix7d gain = llt.solve(state.P).transpose();

  FilterState next = state;
  next.x = state.x + gain * (measurement - state.x);
  const Matrix7d i_minus_k = Matrix7d::Identity() - gain;
  next.P = i_minus_k * state.P * i_minus_k.transpose() + gain * state.R * gain.transpose();
  renormalize_quaternion(next.x);
  return next;
}

std::int32_t CycleConfig::frames_per_cycle() const {
  return std::max<std::int32_t>(1, static_cast<std::int32_t>(std::lround(cycle_period * frame_rate)));
}

CycleOutcome run_localization_cycle(std::span<const PointCloud> frames, const KdTree& map_target,
                                    const FilterState& state, const CycleConfig& cfg,
                                    const SourceParams& source_params,
                                    const MultiscaleParams& icp_params) {
  CycleOutcome outcome;
  outcome.state = predict(state);

  const std::size_t window =
      std::min(frames.size(), static_cast<std::size_t>(std::max(1, cfg.window_frames)));
  if (window < static_cast<std::size_t>(std::max(1, cfg.min_window_frames))) {
    outcome.coast_reason = "window has " + std::to_string(window) + " frames";
    return outcome;
  }

  SourceParams params = source_params;
  params.window_frames = cfg.window_frames;
  try {
    const PointCloud source = build_source_cloud(frames, params);
    IcpResult result =
        multiscale_icp(positions_of(source), map_target, state.pose(), icp_params);
    outcome.icp = result;
    if (result.fitness < cfg.min_fitness) {
      outcome.coast_reason = "fitness below gate";
      return outcome;
    }
    outcome.state = update(outcome.state, to_state_vector(result.transform));
  } catch (const PipelineError& e) {
    outcome.coast_reason = e.what();
  }
  return outcome;
}

CycleOutcome run_localization_cycle(std::span<const PointCloud> frames,
                                    const PointCloud& map_target, const FilterState& state,
                                    const CycleConfig& cfg, const SourceParams& source_params,
                                    const MultiscaleParams& icp_params) {
  const auto target_points = positions_of(map_target);
  const KdTree tree(target_points);
  return run_localization_cycle(frames, tree, state, cfg, source_params, icp_params);
}

}  // namespace roadreg
