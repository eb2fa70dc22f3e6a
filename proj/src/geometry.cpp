#include "roadreg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace roadreg {

std::vector<Eigen::Vector3d> positions_of(const PointCloud& cloud) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.push_back(p.position);
  return out;
}

PointCloud cloud_from_positions(std::span<const Eigen::Vector3d> positions,
                                std::string frame_id) {
  PointCloud cloud;
  cloud.frame_id = std::move(frame_id);
  cloud.points.reserve(positions.size());
  for (const auto& p : positions) cloud.points.push_back(RadarPoint{p, 0.0, 0, {}});
  return cloud;
}

Pose Pose::from_translation(const Eigen::Vector3d& t) {
  Pose pose;
  pose.translation = t;
  return pose;
}

Pose Pose::from_xyz_rpy(const Eigen::Vector3d& t, double roll, double pitch,
                        double yaw) {
  Pose pose;
  pose.translation = t;
  pose.rotation = Eigen::Quaterniond(matrix_from_rpy(roll, pitch, yaw)).normalized();
  return pose;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  Pose pose;
  pose.translation = m.block<3, 1>(0, 3);
  pose.rotation = Eigen::Quaterniond(Eigen::Matrix3d(m.block<3, 3>(0, 0))).normalized();
  return pose;
}

Eigen::Matrix3d Pose::rotation_matrix() const { return rotation.toRotationMatrix(); }

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = rotation_matrix();
  m.block<3, 1>(0, 3) = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose invert(const Pose& a) {
  Pose out;
  out.rotation = a.rotation.conjugate().normalized();
  out.translation = -(out.rotation * a.translation);
  return out;
}

PointCloud transform_cloud(const Pose& transform, const PointCloud& cloud) {
  PointCloud out = cloud;
  const Eigen::Matrix3d r = transform.rotation_matrix();
  for (auto& p : out.points) p.position = r * p.position + transform.translation;
  return out;
}

void transform_points(const Pose& transform, std::span<Eigen::Vector3d> points) {
  const Eigen::Matrix3d r = transform.rotation_matrix();
  for (auto& p : points) p = r * p + transform.translation;
}

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond n = q.normalized();
  if (n.w() < 0.0) n.coeffs() = -n.coeffs();
  return n;
}

double rotation_angle(const Eigen::Quaterniond& q) {
  const Eigen::Quaterniond n = canonical(q);
  // atan2 form stays accurate near zero, unlike acos(w).
  return 2.0 * std::atan2(n.vec().norm(), n.w());
}

Eigen::Vector3d rpy_of(const Eigen::Matrix3d& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw)};
}

Eigen::Matrix3d matrix_from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

double deg2rad(double degrees) { return degrees * std::numbers::pi / 180.0; }
double rad2deg(double radians) { return radians * 180.0 / std::numbers::pi; }

bool is_finite(const Eigen::Vector3d& v) { return v.allFinite(); }

}  // namespace roadreg
