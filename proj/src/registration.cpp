#include "roadreg/registration.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "roadreg/error.hpp"
#include "roadreg/kernels.hpp"

namespace roadreg {
namespace {

// Relative singular-value floor below which the cross-covariance is treated
// as rank deficient (collinear or coincident pairs).
constexpr double kRankTolerance = 1e-10;

struct PairStats {
  double sum_squared = 0.0;
  std::size_t count = 0;
  double rmse() const { return count ? std::sqrt(sum_squared / static_cast<double>(count)) : 0.0; }
};

PairStats stats_of(const Correspondences& c) {
  PairStats s;
  // Sequential sum in source order keeps results independent of threading.
  for (const auto& p : c.pairs) s.sum_squared += p.squared_distance;
  s.count = c.pairs.size();
  return s;
}

}  // namespace

Correspondences nearest_correspondences(const std::vector<Eigen::Vector3d>& source,
                                        const KdTree& target, double max_distance) {
  if (!(max_distance > 0.0)) throw ConfigError("registration: max_distance must be positive");
  if (target.size() == 0) throw PipelineError("registration: target cloud is empty");
  Correspondences out;
  out.max_distance = max_distance;
  const auto hits = kernels::nearest_batch(target, source, max_distance);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i].index >= 0) {
      out.pairs.push_back({static_cast<std::int32_t>(i), hits[i].index, hits[i].squared_distance});
    }
  }
  return out;
}

Correspondences nearest_correspondences(const PointCloud& source, const PointCloud& target,
                                        double max_distance) {
  const auto target_points = positions_of(target);
  const KdTree tree(target_points);
  return nearest_correspondences(positions_of(source), tree, max_distance);
}

Pose estimate_rigid_transform(const std::vector<Eigen::Vector3d>& source,
                              const std::vector<Eigen::Vector3d>& target,
                              const Correspondences& pairs) {
  const std::size_t n = pairs.pairs.size();
  if (n < 3) throw PipelineError("registration: need at least 3 correspondences");

  Eigen::Vector3d mean_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_t = Eigen::Vector3d::Zero();
  for (const auto& p : pairs.pairs) {
    mean_s += source[p.source];
    mean_t += target[p.target];
  }
  mean_s /= static_cast<double>(n);
  mean_t /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pairs.pairs) {
    cov += (source[p.source] - mean_s) * (target[p.target] - mean_t).transpose();
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= kRankTolerance * sv(0)) {
    throw PipelineError("registration: degenerate correspondence set (collinear points)");
  }
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();

  Pose pose;
  pose.rotation = Eigen::Quaterniond(r).normalized();
  pose.translation = mean_t - pose.rotation * mean_s;
  return pose;
}

Pose estimate_rigid_transform(const PointCloud& source, const PointCloud& target,
                              const Correspondences& pairs) {
  return estimate_rigid_transform(positions_of(source), positions_of(target), pairs);
}

IcpResult icp(const std::vector<Eigen::Vector3d>& source, const KdTree& target,
              const Pose& init, const IcpParams& params) {
  if (source.empty()) throw PipelineError("registration: source cloud is empty");
  if (target.size() == 0) throw PipelineError("registration: target cloud is empty");
  if (params.max_iterations < 0) throw ConfigError("registration: max_iterations must be >= 0");
  if (!(params.relative_tolerance >= 0.0)) {
    throw ConfigError("registration: relative_tolerance must be >= 0");
  }

  std::vector<Eigen::Vector3d> target_points(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    target_points[i] = target.point(static_cast<std::int32_t>(i));
  }

  IcpResult result;
  result.transform = init;
  double previous_rmse = 0.0;
  while (true) {
    const auto moved = kernels::transform_batch(result.transform, source);
    const Correspondences corr = nearest_correspondences(moved, target, params.max_distance);
    if (corr.pairs.empty()) {
      if (result.iterations == 0) {
        throw PipelineError("registration: no correspondences at the initial pose");
      }
      // Lost every match after an update; report the empty state honestly.
      result.fitness = 0.0;
      result.inlier_rmse = 0.0;
      break;
    }
    const PairStats stats = stats_of(corr);
    const double rmse = stats.rmse();
    result.rmse_history.push_back(rmse);
    result.fitness = static_cast<double>(stats.count) / static_cast<double>(source.size());
    result.inlier_rmse = rmse;

    if (rmse == 0.0) {
      result.converged = true;
      break;
    }
    if (result.rmse_history.size() > 1 &&
        std::abs(previous_rmse - rmse) < params.relative_tolerance * previous_rmse) {
      result.converged = true;
      break;
    }
    if (result.iterations >= params.max_iterations) break;

    const Pose delta = estimate_rigid_transform(moved, target_points, corr);
    result.transform = compose(delta, result.transform);
    ++result.iterations;
    previous_rmse = rmse;
  }
  return result;
}

IcpResult icp(const PointCloud& source, const PointCloud& target, const Pose& init,
              const IcpParams& params) {
  const auto target_points = positions_of(target);
  const KdTree tree(target_points);
  return icp(positions_of(source), tree, init, params);
}

IcpResult multiscale_icp(const std::vector<Eigen::Vector3d>& source, const KdTree& target,
                         const Pose& init, const MultiscaleParams& params) {
  if (!(params.voxel > 0.0)) throw ConfigError("registration: voxel must be positive");
  if (params.coarse_distance < 2.0 * params.voxel) {
    throw ConfigError("registration: coarse_distance must be at least 2 x voxel");
  }
  const std::array<double, 3> schedule = {params.coarse_distance, 2.0 * params.voxel,
                                          params.voxel};
  IcpResult result;
  result.transform = init;
  std::int32_t total_iterations = 0;
  std::vector<double> history;
  for (const double max_distance : schedule) {
    const IcpParams stage{max_distance, params.max_iterations, params.relative_tolerance};
    result = icp(source, target, result.transform, stage);
    total_iterations += result.iterations;
    history.insert(history.end(), result.rmse_history.begin(), result.rmse_history.end());
  }
  result.iterations = total_iterations;
  result.rmse_history = std::move(history);
  return result;
}

IcpResult multiscale_icp(const PointCloud& source, const PointCloud& target, const Pose& init,
                         const MultiscaleParams& params) {
  const auto target_points = positions_of(target);
  const KdTree tree(target_points);
  return multiscale_icp(positions_of(source), tree, init, params);
}

Compass parse_compass(std::string_view token) {
  std::string key;
  for (const char c : token) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  static const std::array<std::pair<std::string_view, Compass>, 16> table = {{
      {"n", Compass::N},          {"north", Compass::N},
      {"ne", Compass::NE},        {"northeast", Compass::NE},
      {"e", Compass::E},          {"east", Compass::E},
      {"se", Compass::SE},        {"southeast", Compass::SE},
      {"s", Compass::S},          {"south", Compass::S},
      {"sw", Compass::SW},        {"southwest", Compass::SW},
      {"w", Compass::W},          {"west", Compass::W},
      {"nw", Compass::NW},        {"northwest", Compass::NW},
  }};
  for (const auto& [name, heading] : table) {
    if (key == name) return heading;
  }
  throw ConfigError("registration: unknown compass heading '" + std::string(token) + "'");
}

double compass_yaw_deg(Compass heading) {
  switch (heading) {
    case Compass::E: return 0.0;
    case Compass::NE: return 45.0;
    case Compass::N: return 90.0;
    case Compass::NW: return 135.0;
    case Compass::W: return 180.0;
    case Compass::SW: return -135.0;
    case Compass::S: return -90.0;
    case Compass::SE: return -45.0;
  }
  return 0.0;
}

Compass nearest_compass(double yaw_deg) {
  static constexpr std::array<Compass, 8> ring = {Compass::E, Compass::NE, Compass::N,
                                                  Compass::NW, Compass::W, Compass::SW,
                                                  Compass::S, Compass::SE};
  double a = std::fmod(yaw_deg, 360.0);
  if (a < 0.0) a += 360.0;
  const auto slot = static_cast<std::size_t>(std::lround(a / 45.0)) % ring.size();
  return ring[slot];
}

std::string_view to_string(Compass heading) {
  switch (heading) {
    case Compass::N: return "N";
    case Compass::NE: return "NE";
    case Compass::E: return "E";
    case Compass::SE: return "SE";
    case Compass::S: return "S";
    case Compass::SW: return "SW";
    case Compass::W: return "W";
    case Compass::NW: return "NW";
  }
  return "E";
}

Pose coarse_init(const Eigen::Vector2d& position_hint, Compass heading, double height_hint) {
  return Pose::from_xyz_rpy({position_hint.x(), position_hint.y(), height_hint}, 0.0, 0.0,
                            deg2rad(compass_yaw_deg(heading)));
}

Pose coarse_init(const Eigen::Vector2d& position_hint, std::string_view heading,
                 double height_hint) {
  return coarse_init(position_hint, parse_compass(heading), height_hint);
}

}  // namespace roadreg
