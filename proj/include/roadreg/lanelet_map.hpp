// Lane-level road map: lanelets, their subdivision into sub-lane polygons and
// an R-tree for point lookup.
//
// Map files are JSON documents:
//
//   {
//     "format": "roadreg-lanelets-1",
//     "origin": {"easting": 0.0, "northing": 0.0, "zone": "32U"},
//     "lanelets": [
//       {"id": 1, "kind": "driving", "left": [[x, y], ...], "right": [[x, y], ...]}
//     ]
//   }
//
// Coordinates are map-frame meters relative to the origin, which is carried
// as metadata only.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace roadreg {

enum class LaneletKind { driving, turn, junction };

std::string to_string(LaneletKind kind);
LaneletKind lanelet_kind_from_string(const std::string& name);

struct Lanelet {
  std::int64_t id = 0;
  /// Both boundaries run in the driving direction.
  std::vector<Eigen::Vector2d> left;
  std::vector<Eigen::Vector2d> right;
  LaneletKind kind = LaneletKind::driving;
};

struct MapOrigin {
  double easting = 0.0;
  double northing = 0.0;
  std::string zone;
};

struct LaneletMap {
  MapOrigin origin;
  std::vector<Lanelet> lanelets;

  const Lanelet* find(std::int64_t id) const;
};

/// Four-vertex road tile, counter-clockwise.
struct SubLanePolygon {
  std::int64_t id = 0;
  std::array<Eigen::Vector2d, 4> vertices;
  std::int64_t parent_lanelet = 0;
  std::int32_t along_index = 0;

  double area() const;
  Eigen::Vector2d centroid() const;
  /// Boundary-inclusive containment.
  bool contains(const Eigen::Vector2d& p) const;
};

double polyline_length(std::span<const Eigen::Vector2d> line);

/// `n + 1` points spaced evenly by arc length; first and last points are the
/// polyline's endpoints.
std::vector<Eigen::Vector2d> resample_polyline(std::span<const Eigen::Vector2d> line, int n);

/// Throws PipelineError when a boundary has fewer than 2 vertices, zero
/// length, or self-intersects.
void validate_lanelet(const Lanelet& lanelet);

/// Splits a lanelet into quadrilaterals about `step` meters long. Both
/// boundaries are resampled to the same segment count
/// n = ceil(min(L_left, L_right) / step); ids run first_id .. first_id + n - 1.
std::vector<SubLanePolygon> subdivide_lanelet(const Lanelet& lanelet, double step,
                                              std::int64_t first_id = 0);

/// Midline of a lanelet sampled about every `step` meters.
std::vector<Eigen::Vector2d> lanelet_centerline(const Lanelet& lanelet, double step);

/// True when `next` continues `prev`: both boundary end points of `prev`
/// coincide (within 1 mm) with the start points of `next`.
bool lanelets_connect(const Lanelet& prev, const Lanelet& next);

/// Lanelet id sequences from every lanelet without a predecessor to a
/// lanelet without a successor, following lanelets_connect. A route must
/// start on a driving or turn lanelet. Routes are listed in input order of
/// their first lanelet, branches in input order of the successor.
std::vector<std::vector<std::int64_t>> lanelet_routes(const LaneletMap& map);

/// Concatenated centerlines of the lanelets of a route, joints not repeated.
std::vector<Eigen::Vector2d> route_centerline(const LaneletMap& map,
                                              std::span<const std::int64_t> route, double step);

/// Immutable polygon set with a bulk-loaded R-tree over polygon bounding
/// boxes. Copies share the index.
class PolygonMap {
 public:
  PolygonMap() = default;
  explicit PolygonMap(std::vector<SubLanePolygon> polygons);

  const std::vector<SubLanePolygon>& polygons() const { return polygons_; }
  bool empty() const { return polygons_.empty(); }

  /// Ids of all polygons containing `xy`, ascending. R-tree candidates are
  /// confirmed with the exact containment test.
  std::vector<std::int64_t> query_point(const Eigen::Vector2d& xy) const;
  /// Same contract, scanning every polygon.
  std::vector<std::int64_t> query_point_brute_force(const Eigen::Vector2d& xy) const;
  /// True when any polygon contains `xy`.
  bool covers(const Eigen::Vector2d& xy) const;

  /// Position of polygon `id` in polygons(), or -1.
  std::int64_t position_of(std::int64_t id) const;

  /// Axis-aligned bounds of all polygons as (min, max).
  std::pair<Eigen::Vector2d, Eigen::Vector2d> bounds() const;

 private:
  struct Index;
  std::vector<SubLanePolygon> polygons_;
  std::shared_ptr<const Index> index_;
};

/// Subdivides every lanelet and numbers polygons globally from 0 in input
/// order. Overlapping polygons (junctions) are kept.
PolygonMap build_polygon_map(std::span<const Lanelet> lanelets, double step);

/// query_point for many points; OpenMP and serial reference.
std::vector<std::vector<std::int64_t>> query_points(const PolygonMap& map,
                                                    std::span<const Eigen::Vector2d> xy);
std::vector<std::vector<std::int64_t>> query_points_serial(const PolygonMap& map,
                                                           std::span<const Eigen::Vector2d> xy);

void write_map(std::ostream& out, const LaneletMap& map);
LaneletMap read_map(std::istream& in);
void save_map(const std::filesystem::path& path, const LaneletMap& map);
LaneletMap load_map(const std::filesystem::path& path);

}  // namespace roadreg
