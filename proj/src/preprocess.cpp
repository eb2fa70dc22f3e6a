#include "roadreg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "roadreg/error.hpp"
#include "roadreg/kdtree.hpp"
#include "roadreg/kernels.hpp"

namespace roadreg {

PointCloud doppler_filter(const PointCloud& cloud, double v_min) {
  if (!(v_min >= 0.0)) throw ConfigError("preprocess: v_min must be >= 0");
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.stamp_ns = cloud.stamp_ns;
  for (const auto& p : cloud.points) {
    if (std::abs(p.radial_velocity) > v_min) out.points.push_back(p);
  }
  return out;
}

ClusterLabeling dbscan(const PointCloud& cloud, double eps, std::int32_t min_pts) {
  if (!(eps > 0.0)) throw ConfigError("preprocess: dbscan eps must be positive");
  if (min_pts < 1) throw ConfigError("preprocess: dbscan min_pts must be >= 1");

  ClusterLabeling result;
  result.eps = eps;
  result.min_pts = min_pts;
  const std::size_t n = cloud.size();
  result.labels.assign(n, ClusterLabeling::kNoise);
  if (n == 0) return result;

  const auto positions = positions_of(cloud);
  const KdTree tree(positions);
  const auto neighbors = kernels::radius_neighbors(tree, positions, eps);

  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    core[i] = static_cast<std::int32_t>(neighbors[i].size()) >= min_pts;
  }

  std::vector<char> visited(n, 0);
  std::deque<std::int32_t> frontier;
  std::int32_t next_id = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || result.labels[seed] != ClusterLabeling::kNoise) continue;
    const std::int32_t id = next_id++;
    result.labels[seed] = id;
    visited[seed] = 1;
    frontier.push_back(static_cast<std::int32_t>(seed));
    while (!frontier.empty()) {
      const std::int32_t p = frontier.front();
      frontier.pop_front();
      for (const std::int32_t q : neighbors[p]) {
        // Labelled points belong to an earlier (lower-id) cluster or this one.
        if (result.labels[q] == ClusterLabeling::kNoise) result.labels[q] = id;
        if (core[q] && !visited[q]) {
          visited[q] = 1;
          frontier.push_back(q);
        }
      }
    }
  }
  result.cluster_count = next_id;
  return result;
}

PointCloud largest_cluster(const PointCloud& cloud, const ClusterLabeling& labeling) {
  if (labeling.labels.size() != cloud.size()) {
    throw PipelineError("preprocess: labeling does not match cloud size");
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(labeling.cluster_count), 0);
  for (const auto label : labeling.labels) {
    if (label >= 0) ++sizes[static_cast<std::size_t>(label)];
  }
  if (sizes.empty() || *std::max_element(sizes.begin(), sizes.end()) == 0) {
    throw PipelineError("preprocess: all points are noise");
  }
  // max_element returns the first maximum, i.e. the lowest id.
  const auto best = static_cast<std::int32_t>(
      std::distance(sizes.begin(), std::max_element(sizes.begin(), sizes.end())));
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.stamp_ns = cloud.stamp_ns;
  out.points.reserve(sizes[static_cast<std::size_t>(best)]);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (labeling.labels[i] == best) out.points.push_back(cloud.points[i]);
  }
  return out;
}

VoxelGrid voxel_grid(const PointCloud& cloud, double cell_size) {
  if (!(cell_size > 0.0)) throw ConfigError("preprocess: cell_size must be positive");
  VoxelGrid grid;
  grid.cell_size = cell_size;
  const auto n = static_cast<std::int64_t>(cloud.size());
  grid.occupied_cells.resize(cloud.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i].position;
    grid.occupied_cells[i] = {static_cast<std::int64_t>(std::floor(p.x() / cell_size)),
                              static_cast<std::int64_t>(std::floor(p.y() / cell_size)),
                              static_cast<std::int64_t>(std::floor(p.z() / cell_size))};
  }
  auto less = [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  };
  std::sort(grid.occupied_cells.begin(), grid.occupied_cells.end(), less);
  grid.occupied_cells.erase(std::unique(grid.occupied_cells.begin(), grid.occupied_cells.end()),
                            grid.occupied_cells.end());
  return grid;
}

PointCloud voxelize(const PointCloud& cloud, double cell_size) {
  const VoxelGrid grid = voxel_grid(cloud, cell_size);
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.stamp_ns = cloud.stamp_ns;
  out.points.reserve(grid.occupied_cells.size());
  for (const auto& cell : grid.occupied_cells) {
    RadarPoint p;
    p.position = (cell.cast<double>() + Eigen::Vector3d::Constant(0.5)) * cell_size;
    out.points.push_back(p);
  }
  return out;
}

PointCloud mask_road(const PointCloud& scan, const PolygonMap& map) {
  if (map.empty()) throw PipelineError("preprocess: road mask needs a non-empty polygon map");
  const auto n = static_cast<std::int64_t>(scan.size());
  std::vector<char> keep(scan.size(), 0);
#pragma omp parallel for schedule(dynamic, 512)
  for (std::int64_t i = 0; i < n; ++i) {
    keep[i] = map.covers(scan.points[i].position.head<2>());
  }
  PointCloud out;
  out.frame_id = scan.frame_id;
  out.stamp_ns = scan.stamp_ns;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (keep[i]) out.points.push_back(scan.points[i]);
  }
  return out;
}

PointCloud accumulate_frames(std::span<const PointCloud> frames, std::int32_t n_f) {
  if (n_f < 1) throw ConfigError("preprocess: n_f must be >= 1");
  const std::size_t first =
      frames.size() > static_cast<std::size_t>(n_f) ? frames.size() - static_cast<std::size_t>(n_f) : 0;
  PointCloud out;
  std::size_t total = 0;
  for (std::size_t i = first; i < frames.size(); ++i) total += frames[i].size();
  out.points.reserve(total);
  for (std::size_t i = first; i < frames.size(); ++i) {
    out.points.insert(out.points.end(), frames[i].points.begin(), frames[i].points.end());
  }
  if (!frames.empty()) {
    out.frame_id = frames.back().frame_id;
    out.stamp_ns = frames.back().stamp_ns;
  }
  return out;
}

PointCloud build_source_cloud(std::span<const PointCloud> frames, const SourceParams& params) {
  const PointCloud accumulated = accumulate_frames(frames, params.window_frames);
  const PointCloud moving = doppler_filter(accumulated, params.v_min);
  if (moving.empty()) throw PipelineError("preprocess: no moving points");
  const ClusterLabeling labels = dbscan(moving, params.eps, params.min_pts);
  return voxelize(largest_cluster(moving, labels), params.cell_size);
}

PointCloud build_target_cloud(const PointCloud& scan, const PolygonMap& map,
                              const TargetParams& params) {
  const PointCloud road = mask_road(scan, map);
  if (road.empty()) throw PipelineError("preprocess: laser scan has no points on the road");
  const ClusterLabeling labels = dbscan(road, params.eps, params.min_pts);
  return voxelize(largest_cluster(road, labels), params.cell_size);
}

}  // namespace roadreg
