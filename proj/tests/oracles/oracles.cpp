#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace oracle {

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

std::vector<roadreg::Correspondence> brute_correspondences(
    std::span<const Eigen::Vector3d> source, std::span<const Eigen::Vector3d> target,
    double max_distance) {
  const double limit = max_distance * max_distance;
  std::vector<roadreg::Correspondence> out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    std::int32_t best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double d = (source[i] - target[j]).squaredNorm();
      if (d <= limit && d < best_d) {
        best_d = d;
        best = static_cast<std::int32_t>(j);
      }
    }
    if (best >= 0) out.push_back({static_cast<std::int32_t>(i), best, best_d});
  }
  return out;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::vector<std::int32_t> dbscan_reference(std::span<const Eigen::Vector3d> points, double eps,
                                           std::int32_t min_pts) {
  const std::size_t n = points.size();
  const double eps2 = eps * eps;
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if ((points[i] - points[j]).squaredNorm() <= eps2) adj[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = adj[i].size() >= static_cast<std::size_t>(min_pts);

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (std::size_t j : adj[i]) {
      if (core[j]) parent[find_root(parent, i)] = find_root(parent, j);
    }
  }

  // Number components by their lowest core index.
  std::map<std::size_t, std::int32_t> cluster_of_root;
  std::vector<std::int32_t> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const std::size_t r = find_root(parent, i);
    auto it = cluster_of_root.find(r);
    if (it == cluster_of_root.end()) {
      it = cluster_of_root.emplace(r, static_cast<std::int32_t>(cluster_of_root.size())).first;
    }
    labels[i] = it->second;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::int32_t best = -1;
    for (std::size_t j : adj[i]) {
      if (core[j] && (best < 0 || labels[j] < best)) best = labels[j];
    }
    labels[i] = best;
  }
  return labels;
}

bool same_partition(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  if (a.size() != b.size()) return false;
  std::map<std::int32_t, std::int32_t> ab;
  std::map<std::int32_t, std::int32_t> ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    const auto [ia, fresh_a] = ab.emplace(a[i], b[i]);
    const auto [ib, fresh_b] = ba.emplace(b[i], a[i]);
    if (ia->second != b[i] || ib->second != a[i]) return false;
  }
  return true;
}

Scalar1d kalman_1d(double x, double p, double z, double r) {
  const double k = p / (p + r);
  return {x + k * (z - x), (1.0 - k) * p};
}

bool point_in_convex_quad(const std::array<Eigen::Vector2d, 4>& quad, const Eigen::Vector2d& p,
                          double tol) {
  bool neg = false;
  bool pos = false;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d a = quad[i];
    const Eigen::Vector2d b = quad[(i + 1) % 4];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross > tol) pos = true;
    if (cross < -tol) neg = true;
  }
  return !(pos && neg);
}

double polygon_area(std::span<const Eigen::Vector2d> ring) {
  double s = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % ring.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return std::abs(s) / 2.0;
}

std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> voxel_index_set(
    std::span<const Eigen::Vector3d> points, double cell) {
  std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> out;
  for (const auto& p : points) {
    out.emplace(static_cast<std::int64_t>(std::floor(p.x() / cell)),
                static_cast<std::int64_t>(std::floor(p.y() / cell)),
                static_cast<std::int64_t>(std::floor(p.z() / cell)));
  }
  return out;
}

std::map<std::int64_t, std::set<std::int64_t>> naive_windows(
    std::span<const roadreg::OccupancyMessage> messages, std::int64_t window_ns) {
  std::map<std::int64_t, std::set<std::int64_t>> out;
  for (const auto& m : messages) {
    const auto w = static_cast<std::int64_t>(
        std::floor(static_cast<long double>(m.t_ns) / static_cast<long double>(window_ns)));
    auto& cell = out[w];
    cell.insert(m.polygon_ids.begin(), m.polygon_ids.end());
  }
  return out;
}

std::map<std::int64_t, std::int64_t> naive_heat(
    const std::map<std::int64_t, std::set<std::int64_t>>& windows, std::int64_t horizon) {
  std::map<std::int64_t, std::int64_t> counts;
  if (windows.empty()) return counts;
  const std::int64_t newest = windows.rbegin()->first;
  for (const auto& [w, ids] : windows) {
    if (w <= newest - horizon) continue;
    for (auto id : ids) ++counts[id];
  }
  return counts;
}

}  // namespace oracle
