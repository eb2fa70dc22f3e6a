#include "roadreg/kernels.hpp"

namespace roadreg::kernels {

std::vector<Neighbor> nearest_batch(const KdTree& tree,
                                    std::span<const Eigen::Vector3d> queries,
                                    double max_distance) {
  const double max2 = max_distance * max_distance;
  const auto n = static_cast<std::int64_t>(queries.size());
  std::vector<Neighbor> out(queries.size(), Neighbor{-1, 0.0});
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    if (const auto hit = tree.nearest(queries[i], max2)) out[i] = *hit;
  }
  return out;
}

std::vector<Neighbor> nearest_batch_serial(const KdTree& tree,
                                           std::span<const Eigen::Vector3d> queries,
                                           double max_distance) {
  const double max2 = max_distance * max_distance;
  std::vector<Neighbor> out(queries.size(), Neighbor{-1, 0.0});
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (const auto hit = tree.nearest(queries[i], max2)) out[i] = *hit;
  }
  return out;
}

std::vector<std::vector<std::int32_t>> radius_neighbors(
    const KdTree& tree, std::span<const Eigen::Vector3d> queries, double radius) {
  const auto n = static_cast<std::int64_t>(queries.size());
  std::vector<std::vector<std::int32_t>> out(queries.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) tree.radius_search(queries[i], radius, out[i]);
  return out;
}

std::vector<std::vector<std::int32_t>> radius_neighbors_serial(
    const KdTree& tree, std::span<const Eigen::Vector3d> queries, double radius) {
  std::vector<std::vector<std::int32_t>> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) tree.radius_search(queries[i], radius, out[i]);
  return out;
}

std::vector<Eigen::Vector3d> transform_batch(const Pose& pose,
                                             std::span<const Eigen::Vector3d> in) {
  const Eigen::Matrix3d r = pose.rotation_matrix();
  const Eigen::Vector3d t = pose.translation;
  const auto n = static_cast<std::int64_t>(in.size());
  std::vector<Eigen::Vector3d> out(in.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = r * in[i] + t;
  return out;
}

std::vector<Eigen::Vector3d> transform_batch_serial(const Pose& pose,
                                                    std::span<const Eigen::Vector3d> in) {
  const Eigen::Matrix3d r = pose.rotation_matrix();
  std::vector<Eigen::Vector3d> out;
  out.reserve(in.size());
  for (const auto& p : in) out.push_back(r * p + pose.translation);
  return out;
}

}  // namespace roadreg::kernels
