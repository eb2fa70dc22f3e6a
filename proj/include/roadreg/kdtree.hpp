// Static 3D k-d tree with exact, deterministic queries.
//
// Nearest-neighbour ties are broken by the lowest point index, so results
// equal a brute-force scan bit for bit. Radius queries are inclusive and
// return indices in ascending order.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace roadreg {

struct Neighbor {
  std::int32_t index = -1;
  double squared_distance = 0.0;
  bool operator==(const Neighbor&) const = default;
};

class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points, int leaf_size = 12);

  /// Closest point with squared distance <= max_squared_distance.
  std::optional<Neighbor> nearest(const Eigen::Vector3d& query,
                                  double max_squared_distance) const;

  /// All points within `radius` (inclusive), sorted by index.
  void radius_search(const Eigen::Vector3d& query, double radius,
                     std::vector<std::int32_t>& out) const;

  std::size_t size() const { return points_.size(); }
  const Eigen::Vector3d& point(std::int32_t i) const { return points_[i]; }

 private:
  struct Node {
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi = Eigen::Vector3d::Zero();
    std::int32_t begin = 0;
    std::int32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);
  void nearest_in(std::int32_t node, const Eigen::Vector3d& q, Neighbor& best) const;
  void radius_in(std::int32_t node, const Eigen::Vector3d& q, double r2,
                 std::vector<std::int32_t>& out) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
  int leaf_size_;
};

}  // namespace roadreg
