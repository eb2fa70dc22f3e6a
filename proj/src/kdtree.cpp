#include "roadreg/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace roadreg {
namespace {

double box_squared_distance(const Eigen::Vector3d& q, const Eigen::Vector3d& lo,
                            const Eigen::Vector3d& hi) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = 0.0;
    if (q[k] < lo[k]) {
      d = lo[k] - q[k];
    } else if (q[k] > hi[k]) {
      d = q[k] - hi[k];
    }
    d2 += d * d;
  }
  return d2;
}

}  // namespace

KdTree::KdTree(std::span<const Eigen::Vector3d> points, int leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<std::int32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::int32_t begin, std::int32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::int32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= leaf_size_) return id;

  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::int32_t mid = begin + (end - begin) / 2;
  // Index tiebreak keeps the layout independent of std::nth_element details.
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     const double va = points_[a][axis];
                     const double vb = points_[b][axis];
                     return va < vb || (va == vb && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<Neighbor> KdTree::nearest(const Eigen::Vector3d& query,
                                        double max_squared_distance) const {
  if (nodes_.empty()) return std::nullopt;
  Neighbor best{std::numeric_limits<std::int32_t>::max(), max_squared_distance};
  nearest_in(0, query, best);
  if (best.index == std::numeric_limits<std::int32_t>::max()) return std::nullopt;
  return best;
}

void KdTree::nearest_in(std::int32_t node_id, const Eigen::Vector3d& q, Neighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::int32_t i = node.begin; i < node.end; ++i) {
      const std::int32_t idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
        best = {idx, d2};
      }
    }
    return;
  }
  const double dl = box_squared_distance(q, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = box_squared_distance(q, nodes_[node.right].lo, nodes_[node.right].hi);
  const bool left_first = dl <= dr;
  const std::int32_t first = left_first ? node.left : node.right;
  const std::int32_t second = left_first ? node.right : node.left;
  const double d_first = left_first ? dl : dr;
  const double d_second = left_first ? dr : dl;
  // Equal-distance subtrees must still be visited for the index tiebreak.
  if (d_first <= best.squared_distance) nearest_in(first, q, best);
  if (d_second <= best.squared_distance) nearest_in(second, q, best);
}

void KdTree::radius_search(const Eigen::Vector3d& query, double radius,
                           std::vector<std::int32_t>& out) const {
  out.clear();
  if (nodes_.empty()) return;
  radius_in(0, query, radius * radius, out);
  std::sort(out.begin(), out.end());
}

void KdTree::radius_in(std::int32_t node_id, const Eigen::Vector3d& q, double r2,
                       std::vector<std::int32_t>& out) const {
  const Node& node = nodes_[node_id];
  if (box_squared_distance(q, node.lo, node.hi) > r2) return;
  if (node.left < 0) {
    for (std::int32_t i = node.begin; i < node.end; ++i) {
      const std::int32_t idx = order_[i];
      if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
    }
    return;
  }
  radius_in(node.left, q, r2, out);
  radius_in(node.right, q, r2, out);
}

}  // namespace roadreg
