// Turns raw radar frames and an aerial laser scan into the two clouds that
// registration aligns: the accumulated moving-vehicle traces (source) and
// the masked, cleaned road surface (target).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "roadreg/geometry.hpp"
#include "roadreg/lanelet_map.hpp"

namespace roadreg {

struct ClusterLabeling {
  static constexpr std::int32_t kNoise = -1;

  /// One label per input point: kNoise or a cluster id in [0, cluster_count).
  std::vector<std::int32_t> labels;
  std::int32_t cluster_count = 0;
  double eps = 0.0;
  std::int32_t min_pts = 0;
};

struct VoxelGrid {
  double cell_size = 0.5;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  /// Sorted, unique.
  std::vector<Eigen::Matrix<std::int64_t, 3, 1>> occupied_cells;
};

/// Radar-side parameters. Defaults: 0.15 m/s gate, eps 0.5 m, 10 points,
/// 0.5 m cells, 2000-frame window.
struct SourceParams {
  double v_min = 0.15;
  double eps = 0.5;
  std::int32_t min_pts = 10;
  double cell_size = 0.5;
  std::int32_t window_frames = 2000;
};

/// Laser-scan side parameters.
struct TargetParams {
  double eps = 0.5;
  std::int32_t min_pts = 10;
  double cell_size = 0.5;
};

/// Keeps points with |radial_velocity| > v_min, in order.
PointCloud doppler_filter(const PointCloud& cloud, double v_min);

/// DBSCAN in 3D Euclidean distance. A point is core when at least min_pts
/// points (itself included) lie within eps (inclusive). Clusters are numbered
/// in order of their lowest-index core point; a border point reachable from
/// several clusters joins the lowest-numbered one.
ClusterLabeling dbscan(const PointCloud& cloud, double eps, std::int32_t min_pts);

/// Points of the most populated cluster (lowest id on ties). Throws
/// PipelineError when every point is noise.
PointCloud largest_cluster(const PointCloud& cloud, const ClusterLabeling& labeling);

/// Occupied cells, indexed by floor(position / cell_size) on every axis.
VoxelGrid voxel_grid(const PointCloud& cloud, double cell_size);

/// One point per occupied cell, at the cell center, cells in lexicographic
/// index order. Output points carry zero velocity and timestamp.
PointCloud voxelize(const PointCloud& cloud, double cell_size);

/// Keeps points whose (x, y) lies inside any map polygon.
PointCloud mask_road(const PointCloud& scan, const PolygonMap& map);

/// Concatenation of the last n_f frames (all frames if fewer exist).
PointCloud accumulate_frames(std::span<const PointCloud> frames, std::int32_t n_f);

/// Accumulates the last params.window_frames frames, then
/// doppler_filter -> dbscan -> largest_cluster -> voxelize. Throws
/// PipelineError "no moving points" when nothing passes the Doppler gate.
PointCloud build_source_cloud(std::span<const PointCloud> frames, const SourceParams& params);

/// mask_road -> dbscan -> largest_cluster -> voxelize. The largest cluster
/// is the connected road surface; canopy returns over the road and sparse
/// outliers fall away.
PointCloud build_target_cloud(const PointCloud& scan, const PolygonMap& map,
                              const TargetParams& params);

}  // namespace roadreg
