#include "roadreg/lanelet_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

// Boost 1.74 geometry includes its own deprecated headers.
#define BOOST_ALLOW_DEPRECATED_HEADERS
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <json.hpp>

#include "roadreg/error.hpp"

namespace roadreg {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using BoxPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using Box = bg::model::box<BoxPoint>;
using IndexValue = std::pair<Box, std::uint32_t>;

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

int orientation(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                        const Eigen::Vector2d& q1, const Eigen::Vector2d& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

void validate_boundary(const std::vector<Eigen::Vector2d>& line, std::int64_t id,
                       const char* side) {
  const std::string where = "lanelet " + std::to_string(id) + " " + side + " boundary";
  if (line.size() < 2) throw PipelineError("lanelet_map: " + where + " has fewer than 2 vertices");
  for (const auto& v : line) {
    if (!v.allFinite()) throw PipelineError("lanelet_map: " + where + " has non-finite vertex");
  }
  if (polyline_length(line) <= 0.0) throw PipelineError("lanelet_map: " + where + " has zero length");
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    for (std::size_t j = i + 2; j + 1 < line.size(); ++j) {
      if (segments_intersect(line[i], line[i + 1], line[j], line[j + 1])) {
        throw PipelineError("lanelet_map: " + where + " self-intersects");
      }
    }
  }
}

}  // namespace

struct PolygonMap::Index {
  bgi::rtree<IndexValue, bgi::quadratic<16>> tree;
};

std::string to_string(LaneletKind kind) {
  switch (kind) {
    case LaneletKind::driving: return "driving";
    case LaneletKind::turn: return "turn";
    case LaneletKind::junction: return "junction";
  }
  return "driving";
}

LaneletKind lanelet_kind_from_string(const std::string& name) {
  if (name == "driving") return LaneletKind::driving;
  if (name == "turn") return LaneletKind::turn;
  if (name == "junction") return LaneletKind::junction;
  throw PipelineError("lanelet_map: unknown lanelet kind '" + name + "'");
}

const Lanelet* LaneletMap::find(std::int64_t id) const {
  for (const auto& l : lanelets) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

double SubLanePolygon::area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < 4; ++i) twice += cross(vertices[i], vertices[(i + 1) % 4]);
  return 0.5 * twice;
}

Eigen::Vector2d SubLanePolygon::centroid() const {
  // Area centroid via the two triangles (0,1,2) and (0,2,3).
  const double a1 = 0.5 * cross(vertices[1] - vertices[0], vertices[2] - vertices[0]);
  const double a2 = 0.5 * cross(vertices[2] - vertices[0], vertices[3] - vertices[0]);
  const Eigen::Vector2d c1 = (vertices[0] + vertices[1] + vertices[2]) / 3.0;
  const Eigen::Vector2d c2 = (vertices[0] + vertices[2] + vertices[3]) / 3.0;
  if (a1 + a2 == 0.0) return (vertices[0] + vertices[1] + vertices[2] + vertices[3]) / 4.0;
  return (a1 * c1 + a2 * c2) / (a1 + a2);
}

bool SubLanePolygon::contains(const Eigen::Vector2d& p) const {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = vertices[i];
    const auto& b = vertices[(i + 1) % 4];
    if (cross(b - a, p - a) == 0.0 && on_segment(a, b, p)) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = 3; i < 4; j = i++) {
    const auto& a = vertices[i];
    const auto& b = vertices[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double polyline_length(std::span<const Eigen::Vector2d> line) {
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) length += (line[i + 1] - line[i]).norm();
  return length;
}

std::vector<Eigen::Vector2d> resample_polyline(std::span<const Eigen::Vector2d> line, int n) {
  std::vector<double> cumulative(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (line[i] - line[i - 1]).norm();
  }
  const double total = cumulative.back();
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(line.front());
  std::size_t seg = 0;
  for (int k = 1; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 2 < line.size() && cumulative[seg + 1] < target) ++seg;
    const double len = cumulative[seg + 1] - cumulative[seg];
    const double t = len > 0.0 ? (target - cumulative[seg]) / len : 0.0;
    out.push_back(line[seg] + t * (line[seg + 1] - line[seg]));
  }
  out.push_back(line.back());
  return out;
}

void validate_lanelet(const Lanelet& lanelet) {
  validate_boundary(lanelet.left, lanelet.id, "left");
  validate_boundary(lanelet.right, lanelet.id, "right");
}

std::vector<SubLanePolygon> subdivide_lanelet(const Lanelet& lanelet, double step,
                                              std::int64_t first_id) {
  if (!(step > 0.0)) throw ConfigError("lanelet_map: subdivision step must be positive");
  validate_lanelet(lanelet);
  const double shorter = std::min(polyline_length(lanelet.left), polyline_length(lanelet.right));
  const int n = std::max(1, static_cast<int>(std::ceil(shorter / step)));
  const auto left = resample_polyline(lanelet.left, n);
  const auto right = resample_polyline(lanelet.right, n);

  std::vector<SubLanePolygon> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    SubLanePolygon poly;
    poly.id = first_id + k;
    poly.parent_lanelet = lanelet.id;
    poly.along_index = k;
    // Right boundary first gives counter-clockwise order for a lane whose
    // left side is on the left of the driving direction.
    poly.vertices = {right[k], right[k + 1], left[k + 1], left[k]};
    if (poly.area() < 0.0) poly.vertices = {left[k], left[k + 1], right[k + 1], right[k]};
    out.push_back(poly);
  }
  return out;
}

std::vector<Eigen::Vector2d> lanelet_centerline(const Lanelet& lanelet, double step) {
  validate_lanelet(lanelet);
  const double longer = std::max(polyline_length(lanelet.left), polyline_length(lanelet.right));
  const int n = std::max(1, static_cast<int>(std::ceil(longer / step)));
  const auto left = resample_polyline(lanelet.left, n);
  const auto right = resample_polyline(lanelet.right, n);
  std::vector<Eigen::Vector2d> mid(left.size());
  for (std::size_t i = 0; i < left.size(); ++i) mid[i] = 0.5 * (left[i] + right[i]);
  return mid;
}

bool lanelets_connect(const Lanelet& prev, const Lanelet& next) {
  constexpr double kTolerance = 1e-3;
  return (prev.left.back() - next.left.front()).norm() <= kTolerance &&
         (prev.right.back() - next.right.front()).norm() <= kTolerance;
}

std::vector<std::vector<std::int64_t>> lanelet_routes(const LaneletMap& map) {
  const auto& ls = map.lanelets;
  const std::size_t n = ls.size();
  std::vector<std::vector<std::size_t>> successors(n);
  std::vector<bool> has_predecessor(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i != k && lanelets_connect(ls[i], ls[k])) {
        successors[i].push_back(k);
        has_predecessor[k] = true;
      }
    }
  }
  std::vector<std::vector<std::int64_t>> routes;
  std::vector<std::size_t> path;
  std::vector<bool> on_path(n, false);
  const auto walk = [&](auto&& self, std::size_t i) -> void {
    path.push_back(i);
    on_path[i] = true;
    bool extended = false;
    for (const std::size_t k : successors[i]) {
      if (on_path[k]) continue;
      extended = true;
      self(self, k);
    }
    if (!extended) {
      std::vector<std::int64_t> ids;
      for (const std::size_t p : path) ids.push_back(ls[p].id);
      routes.push_back(std::move(ids));
    }
    on_path[i] = false;
    path.pop_back();
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (has_predecessor[i] || ls[i].kind == LaneletKind::junction) continue;
    walk(walk, i);
  }
  return routes;
}

std::vector<Eigen::Vector2d> route_centerline(const LaneletMap& map,
                                              std::span<const std::int64_t> route, double step) {
  std::vector<Eigen::Vector2d> out;
  for (const std::int64_t id : route) {
    const Lanelet* l = map.find(id);
    if (l == nullptr) throw PipelineError("lanelet_map: route references unknown lanelet");
    const auto part = lanelet_centerline(*l, step);
    out.insert(out.end(), part.begin() + (out.empty() ? 0 : 1), part.end());
  }
  return out;
}

PolygonMap::PolygonMap(std::vector<SubLanePolygon> polygons) : polygons_(std::move(polygons)) {
  std::vector<IndexValue> values;
  values.reserve(polygons_.size());
  for (std::size_t i = 0; i < polygons_.size(); ++i) {
    Eigen::Vector2d lo = polygons_[i].vertices[0];
    Eigen::Vector2d hi = lo;
    for (const auto& v : polygons_[i].vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    values.emplace_back(Box(BoxPoint(lo.x(), lo.y()), BoxPoint(hi.x(), hi.y())),
                        static_cast<std::uint32_t>(i));
  }
  auto index = std::make_shared<Index>();
  // Range construction uses the packing (bulk-loading) algorithm.
  index->tree = decltype(index->tree)(values.begin(), values.end());
  index_ = std::move(index);
}

std::vector<std::int64_t> PolygonMap::query_point(const Eigen::Vector2d& xy) const {
  std::vector<std::int64_t> ids;
  if (!index_) return ids;
  std::vector<IndexValue> candidates;
  index_->tree.query(bgi::intersects(BoxPoint(xy.x(), xy.y())), std::back_inserter(candidates));
  for (const auto& [box, pos] : candidates) {
    if (polygons_[pos].contains(xy)) ids.push_back(polygons_[pos].id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::int64_t> PolygonMap::query_point_brute_force(const Eigen::Vector2d& xy) const {
  std::vector<std::int64_t> ids;
  for (const auto& poly : polygons_) {
    if (poly.contains(xy)) ids.push_back(poly.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool PolygonMap::covers(const Eigen::Vector2d& xy) const {
  if (!index_) return false;
  for (auto it = index_->tree.qbegin(bgi::intersects(BoxPoint(xy.x(), xy.y())));
       it != index_->tree.qend(); ++it) {
    if (polygons_[it->second].contains(xy)) return true;
  }
  return false;
}

std::int64_t PolygonMap::position_of(std::int64_t id) const {
  // Ids from build_polygon_map are dense and ordered; fall back to a scan.
  if (id >= 0 && id < static_cast<std::int64_t>(polygons_.size()) && polygons_[id].id == id) {
    return id;
  }
  for (std::size_t i = 0; i < polygons_.size(); ++i) {
    if (polygons_[i].id == id) return static_cast<std::int64_t>(i);
  }
  return -1;
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> PolygonMap::bounds() const {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& poly : polygons_) {
    for (const auto& v : poly.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  return {lo, hi};
}

PolygonMap build_polygon_map(std::span<const Lanelet> lanelets, double step) {
  if (lanelets.empty()) throw PipelineError("lanelet_map: no lanelets to subdivide");
  std::vector<SubLanePolygon> all;
  for (const auto& lanelet : lanelets) {
    auto polys = subdivide_lanelet(lanelet, step, static_cast<std::int64_t>(all.size()));
    all.insert(all.end(), polys.begin(), polys.end());
  }
  return PolygonMap(std::move(all));
}

std::vector<std::vector<std::int64_t>> query_points(const PolygonMap& map,
                                                    std::span<const Eigen::Vector2d> xy) {
  std::vector<std::vector<std::int64_t>> out(xy.size());
  const auto n = static_cast<std::int64_t>(xy.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) out[i] = map.query_point(xy[i]);
  return out;
}

std::vector<std::vector<std::int64_t>> query_points_serial(const PolygonMap& map,
                                                           std::span<const Eigen::Vector2d> xy) {
  std::vector<std::vector<std::int64_t>> out;
  out.reserve(xy.size());
  for (const auto& p : xy) out.push_back(map.query_point(p));
  return out;
}

namespace {

nlohmann::json polyline_to_json(const std::vector<Eigen::Vector2d>& line) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : line) arr.push_back({v.x(), v.y()});
  return arr;
}

std::vector<Eigen::Vector2d> polyline_from_json(const nlohmann::json& arr) {
  std::vector<Eigen::Vector2d> line;
  for (const auto& v : arr) {
    if (!v.is_array() || v.size() != 2) throw PipelineError("lanelet_map: vertex must be [x, y]");
    line.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  return line;
}

}  // namespace

void write_map(std::ostream& out, const LaneletMap& map) {
  nlohmann::json doc;
  doc["format"] = "roadreg-lanelets-1";
  doc["origin"] = {{"easting", map.origin.easting},
                   {"northing", map.origin.northing},
                   {"zone", map.origin.zone}};
  doc["lanelets"] = nlohmann::json::array();
  for (const auto& l : map.lanelets) {
    doc["lanelets"].push_back({{"id", l.id},
                               {"kind", to_string(l.kind)},
                               {"left", polyline_to_json(l.left)},
                               {"right", polyline_to_json(l.right)}});
  }
  out << doc.dump(2) << '\n';
}

LaneletMap read_map(std::istream& in) {
  LaneletMap map;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.contains("origin")) {
      const auto& o = doc.at("origin");
      map.origin.easting = o.value("easting", 0.0);
      map.origin.northing = o.value("northing", 0.0);
      map.origin.zone = o.value("zone", std::string());
    }
    for (const auto& item : doc.at("lanelets")) {
      Lanelet l;
      l.id = item.at("id").get<std::int64_t>();
      l.kind = lanelet_kind_from_string(item.value("kind", std::string("driving")));
      l.left = polyline_from_json(item.at("left"));
      l.right = polyline_from_json(item.at("right"));
      map.lanelets.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError(std::string("lanelet_map: malformed map document: ") + e.what());
  }
  return map;
}

void save_map(const std::filesystem::path& path, const LaneletMap& map) {
  std::ofstream out(path);
  if (!out) throw PipelineError("lanelet_map: cannot write " + path.string());
  write_map(out, map);
}

LaneletMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("lanelet_map: cannot open " + path.string());
  return read_map(in);
}

}  // namespace roadreg
