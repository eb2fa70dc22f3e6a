// Data-parallel inner loops.
//
// Every kernel comes in an OpenMP version and a `_serial` reference with the
// same contract. Each output element depends only on its own input element,
// so both produce identical results regardless of thread count; the serial
// versions exist for tests and for the benchmark target.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "roadreg/geometry.hpp"
#include "roadreg/kdtree.hpp"

namespace roadreg::kernels {

/// Nearest tree point within max_distance (inclusive) for every query.
/// Entries with index -1 have no neighbour in range.
std::vector<Neighbor> nearest_batch(const KdTree& tree,
                                    std::span<const Eigen::Vector3d> queries,
                                    double max_distance);
std::vector<Neighbor> nearest_batch_serial(const KdTree& tree,
                                           std::span<const Eigen::Vector3d> queries,
                                           double max_distance);

/// Inclusive radius neighbourhoods, each sorted by index (includes the
/// query point itself when the queries are the tree points).
std::vector<std::vector<std::int32_t>> radius_neighbors(
    const KdTree& tree, std::span<const Eigen::Vector3d> queries, double radius);
std::vector<std::vector<std::int32_t>> radius_neighbors_serial(
    const KdTree& tree, std::span<const Eigen::Vector3d> queries, double radius);

/// out[i] = pose.apply(in[i]).
std::vector<Eigen::Vector3d> transform_batch(const Pose& pose,
                                             std::span<const Eigen::Vector3d> in);
std::vector<Eigen::Vector3d> transform_batch_serial(const Pose& pose,
                                                    std::span<const Eigen::Vector3d> in);

}  // namespace roadreg::kernels
