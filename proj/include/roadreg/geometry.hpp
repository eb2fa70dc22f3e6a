// Shared geometric types: radar detections, point clouds and rigid poses.
//
// All coordinates are double precision. The map frame is a local planar
// east-north-up frame; x points east, y north, z up.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace roadreg {

/// One radar detection (or a bare laser-scan point, with zero velocity and
/// timestamp).
struct RadarPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// Signed line-of-sight speed in m/s, positive when moving away.
  double radial_velocity = 0.0;
  std::int64_t timestamp_ns = 0;
  /// Radar cross section in dBsm, when the sensor reports one.
  std::optional<double> rcs;

  bool operator==(const RadarPoint&) const = default;
};

struct PointCloud {
  std::vector<RadarPoint> points;
  std::string frame_id;
  /// Acquisition time of the whole cloud (frame timestamp). Kept separately
  /// from the per-point stamps so that empty frames still carry a time.
  std::int64_t stamp_ns = 0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool operator==(const PointCloud&) const = default;
};

/// Positions of a cloud as a contiguous array.
std::vector<Eigen::Vector3d> positions_of(const PointCloud& cloud);

/// Builds a cloud of bare points (zero velocity and timestamp).
PointCloud cloud_from_positions(std::span<const Eigen::Vector3d> positions,
                                std::string frame_id = {});

/// Rigid transform in SE(3). Maps a point p to rotation * p + translation.
///
/// Serialized everywhere as (x, y, z, qx, qy, qz, qw).
struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t);
  /// Intrinsic z-y-x (yaw, then pitch, then roll), angles in radians.
  static Pose from_xyz_rpy(const Eigen::Vector3d& t, double roll, double pitch,
                           double yaw);
  static Pose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Matrix3d rotation_matrix() const;
  Eigen::Matrix4d matrix() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
};

/// Result applies b first, then a.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);

/// Maps every position by the pose; velocities, stamps and rcs are kept.
PointCloud transform_cloud(const Pose& transform, const PointCloud& cloud);
void transform_points(const Pose& transform, std::span<Eigen::Vector3d> points);

/// Unit quaternion with non-negative w.
Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

/// Rotation angle of a relative rotation, radians in [0, pi].
double rotation_angle(const Eigen::Quaterniond& q);

/// Intrinsic z-y-x decomposition of a rotation. Returns (roll, pitch, yaw)
/// in radians, each wrapped to (-pi, pi].
Eigen::Vector3d rpy_of(const Eigen::Matrix3d& r);
Eigen::Matrix3d matrix_from_rpy(double roll, double pitch, double yaw);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);
double deg2rad(double degrees);
double rad2deg(double radians);

bool is_finite(const Eigen::Vector3d& v);

}  // namespace roadreg
