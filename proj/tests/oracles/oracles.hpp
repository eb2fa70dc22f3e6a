// Slow, direct reference implementations used to check the library.
// Nothing here calls into the code under test except for plain data types.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "roadreg/geometry.hpp"
#include "roadreg/occupancy.hpp"
#include "roadreg/registration.hpp"

namespace oracle {

/// Elementary rotations written out entry by entry.
Eigen::Matrix3d rot_x(double a);
Eigen::Matrix3d rot_y(double a);
Eigen::Matrix3d rot_z(double a);

/// O(n*m) scan: nearest target within max_distance (inclusive), lowest index
/// on ties.
std::vector<roadreg::Correspondence> brute_correspondences(
    std::span<const Eigen::Vector3d> source, std::span<const Eigen::Vector3d> target,
    double max_distance);

/// O(n^2) DBSCAN: core points from a full distance scan, clusters as
/// connected components of core points (union-find) numbered by their lowest
/// core index, border points to the lowest-numbered adjacent cluster.
std::vector<std::int32_t> dbscan_reference(std::span<const Eigen::Vector3d> points, double eps,
                                           std::int32_t min_pts);

/// True when both labelings induce the same partition and the same noise set.
bool same_partition(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

struct Scalar1d {
  double x;
  double p;
};
/// Scalar Kalman correction with unit measurement model.
Scalar1d kalman_1d(double x, double p, double z, double r);

/// Boundary-inclusive test against a convex quadrilateral in either winding.
bool point_in_convex_quad(const std::array<Eigen::Vector2d, 4>& quad, const Eigen::Vector2d& p,
                          double tol = 1e-12);

/// Shoelace formula, absolute value.
double polygon_area(std::span<const Eigen::Vector2d> ring);

/// Distinct floor(p / cell) triples.
std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> voxel_index_set(
    std::span<const Eigen::Vector3d> points, double cell);

/// Window index -> union of polygon ids, by floor division with no
/// lateness handling.
std::map<std::int64_t, std::set<std::int64_t>> naive_windows(
    std::span<const roadreg::OccupancyMessage> messages, std::int64_t window_ns);

/// Per-polygon count of windows in (newest - horizon, newest] that contain it.
std::map<std::int64_t, std::int64_t> naive_heat(
    const std::map<std::int64_t, std::set<std::int64_t>>& windows, std::int64_t horizon);

}  // namespace oracle
