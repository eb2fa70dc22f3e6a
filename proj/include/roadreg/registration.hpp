// Point-to-point ICP that aligns the radar trace cloud (sensor frame) with
// the laser-scan road cloud (map frame). The recovered transform is the
// sensor pose in the map frame.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "roadreg/geometry.hpp"
#include "roadreg/kdtree.hpp"

namespace roadreg {

struct Correspondence {
  std::int32_t source = 0;
  std::int32_t target = 0;
  double squared_distance = 0.0;
  bool operator==(const Correspondence&) const = default;
};

struct Correspondences {
  /// Ordered by source index; each source index at most once.
  std::vector<Correspondence> pairs;
  double max_distance = 0.0;
};

struct IcpResult {
  Pose transform;
  /// Matched fraction of the source cloud at the final transform.
  double fitness = 0.0;
  double inlier_rmse = 0.0;
  /// Number of transform updates performed.
  std::int32_t iterations = 0;
  bool converged = false;
  /// Inlier RMSE at every evaluated transform, first entry at the initial pose.
  std::vector<double> rmse_history;
};

struct IcpParams {
  double max_distance = 10.0;
  std::int32_t max_iterations = 50;
  double relative_tolerance = 1e-6;
};

struct MultiscaleParams {
  double voxel = 0.5;
  /// Correspondence distance of the first stage; later stages use 2x and 1x
  /// the voxel size.
  double coarse_distance = 30.0;
  std::int32_t max_iterations = 50;
  double relative_tolerance = 1e-6;
};

/// Nearest target point for every source point within max_distance
/// (inclusive). Ties go to the lowest target index.
Correspondences nearest_correspondences(const std::vector<Eigen::Vector3d>& source,
                                        const KdTree& target, double max_distance);
Correspondences nearest_correspondences(const PointCloud& source, const PointCloud& target,
                                        double max_distance);

/// Least-squares rigid transform taking paired source points onto their
/// targets (centroid alignment plus an SVD of the cross-covariance with
/// reflection correction). Throws PipelineError with fewer than 3 pairs or
/// when the paired points are collinear.
Pose estimate_rigid_transform(const std::vector<Eigen::Vector3d>& source,
                              const std::vector<Eigen::Vector3d>& target,
                              const Correspondences& pairs);
Pose estimate_rigid_transform(const PointCloud& source, const PointCloud& target,
                              const Correspondences& pairs);

/// Alternates correspondence search and rigid fitting from `init`. Stops when
/// the relative change of inlier RMSE falls below the tolerance or after
/// max_iterations updates. Throws PipelineError when nothing matches at the
/// initial pose. The inlier RMSE can rise when points enter the
/// max_distance gate; with every source point matched it cannot.
IcpResult icp(const std::vector<Eigen::Vector3d>& source, const KdTree& target,
              const Pose& init, const IcpParams& params);
IcpResult icp(const PointCloud& source, const PointCloud& target, const Pose& init,
              const IcpParams& params);

/// Three chained icp() runs with correspondence distances coarse_distance,
/// 2 * voxel and voxel, each seeded by the previous result. Throws
/// ConfigError when coarse_distance < 2 * voxel.
IcpResult multiscale_icp(const std::vector<Eigen::Vector3d>& source, const KdTree& target,
                         const Pose& init, const MultiscaleParams& params);
IcpResult multiscale_icp(const PointCloud& source, const PointCloud& target, const Pose& init,
                         const MultiscaleParams& params);

enum class Compass { N, NE, E, SE, S, SW, W, NW };

/// Accepts "N", "north", "NE", "north-east", "northeast", ... (case-insensitive).
Compass parse_compass(std::string_view token);
/// Yaw in degrees in the east-north frame: E = 0, N = 90, W = 180, S = -90.
double compass_yaw_deg(Compass heading);
/// The compass direction closest to a yaw angle.
Compass nearest_compass(double yaw_deg);
std::string_view to_string(Compass heading);

/// Seed pose from a coarse manual placement: given xy and height, yaw from
/// the compass direction, zero roll and pitch.
Pose coarse_init(const Eigen::Vector2d& position_hint, Compass heading, double height_hint);
Pose coarse_init(const Eigen::Vector2d& position_hint, std::string_view heading,
                 double height_hint);

}  // namespace roadreg
