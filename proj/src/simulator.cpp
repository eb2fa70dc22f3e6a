#include "roadreg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "json_fields.hpp"
#include "roadreg/cloud_io.hpp"
#include "roadreg/error.hpp"
#include "roadreg/registration.hpp"

namespace roadreg {
namespace {

using detail::check_keys;
using detail::read_field;
using nlohmann::json;
using nlohmann::ordered_json;

// Independent random streams per purpose so that, for example, adding a
// sensor does not change the traffic.
enum class Stream : std::uint64_t { traffic = 1, scan = 2, sensor = 100 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

double round_to(double value, std::int32_t decimals) {
  if (decimals < 0) return value;
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

std::int64_t poisson(std::mt19937_64& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(std::mt19937_64& rng, double sigma) {
  if (!(sigma > 0.0)) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

Eigen::Vector3d uniform_in_ball(std::mt19937_64& rng, const Eigen::Vector3d& center, double r) {
  while (true) {
    const Eigen::Vector3d u(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    if (u.squaredNorm() <= 1.0) return center + r * u;
  }
}

void positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("simulator: ") + name + " must be positive");
  }
}

void non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("simulator: ") + name + " must be >= 0");
  }
}

// Path offset sideways by `offset` (positive = left of travel direction),
// using per-vertex normals averaged from the adjacent segments.
std::vector<Eigen::Vector2d> offset_path(std::span<const Eigen::Vector2d> path, double offset) {
  std::vector<Eigen::Vector2d> out(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    Eigen::Vector2d dir = Eigen::Vector2d::Zero();
    if (i > 0) dir += (path[i] - path[i - 1]).normalized();
    if (i + 1 < path.size()) dir += (path[i + 1] - path[i]).normalized();
    if (dir.squaredNorm() == 0.0) dir = Eigen::Vector2d::UnitX();
    dir.normalize();
    out[i] = path[i] + offset * Eigen::Vector2d(-dir.y(), dir.x());
  }
  return out;
}

VehicleTrack track_with_speeds(std::int64_t id, std::span<const Eigen::Vector2d> path, double t0,
                               const std::vector<double>& segment_speeds) {
  VehicleTrack track;
  track.id = id;
  track.waypoints.reserve(path.size());
  double t = t0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double speed = i + 1 < path.size() ? segment_speeds[i] : 0.0;
    track.waypoints.push_back({t, path[i], speed});
    if (i + 1 < path.size()) t += (path[i + 1] - path[i]).norm() / speed;
  }
  return track;
}

struct Face {
  Eigen::Vector3d center;
  Eigen::Vector3d u;  // half-extent axes
  Eigen::Vector3d v;
  Eigen::Vector3d normal;
  double area;
};

std::array<Face, 5> box_faces(const VehicleTrack& track, const VehicleState& state) {
  const Eigen::Vector3d f(std::cos(state.heading), std::sin(state.heading), 0.0);
  const Eigen::Vector3d l(-f.y(), f.x(), 0.0);
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d c(state.position.x(), state.position.y(), track.height / 2);
  const double hl = track.length / 2, hw = track.width / 2, hh = track.height / 2;
  return {{
      {c + f * hl, l * hw, up * hh, f, track.width * track.height},
      {c - f * hl, l * hw, up * hh, -f, track.width * track.height},
      {c + l * hw, f * hl, up * hh, l, track.length * track.height},
      {c - l * hw, f * hl, up * hh, -l, track.length * track.height},
      {c + up * hh, f * hl, l * hw, up, track.length * track.width},
  }};
}

struct SensorView {
  const SensorConfig& sensor;
  Eigen::Matrix3d r_map_from_sensor;
  Eigen::Vector3d origin;

  explicit SensorView(const SensorConfig& s)
      : sensor(s), r_map_from_sensor(s.pose.rotation_matrix()), origin(s.pose.translation) {}

  Eigen::Vector3d to_sensor(const Eigen::Vector3d& p_map) const {
    return r_map_from_sensor.transpose() * (p_map - origin);
  }

  bool in_fov(const Eigen::Vector3d& q) const {
    const double r = q.norm();
    if (r <= 0.0 || r > sensor.spec.max_range) return false;
    const double az = std::atan2(q.y(), q.x());
    const double el = std::asin(std::clamp(q.z() / r, -1.0, 1.0));
    return std::abs(az) <= deg2rad(sensor.spec.azimuth_fov_deg) / 2 &&
           std::abs(el) <= deg2rad(sensor.spec.elevation_fov_deg) / 2;
  }
};

// Point from spherical sensor coordinates.
Eigen::Vector3d from_spherical(double range, double az, double el) {
  return {range * std::cos(el) * std::cos(az), range * std::cos(el) * std::sin(az),
          range * std::sin(el)};
}

RadarPoint make_detection(const SensorView& view, const Eigen::Vector3d& q_true,
                          double radial_velocity, double rcs, std::int64_t stamp_ns,
                          std::mt19937_64& rng) {
  const RadarSpec& spec = view.sensor.spec;
  const double range = q_true.norm();
  double az = std::atan2(q_true.y(), q_true.x());
  double el = std::asin(std::clamp(q_true.z() / range, -1.0, 1.0));
  const double sigma_angle = deg2rad(spec.angle_noise_sigma_deg);
  const double r_noisy = range + normal(rng, spec.range_noise_sigma);
  az += normal(rng, sigma_angle);
  el += normal(rng, sigma_angle);
  const double v_noisy = radial_velocity + normal(rng, spec.velocity_noise_sigma);

  RadarPoint p;
  const Eigen::Vector3d q = from_spherical(r_noisy, az, el);
  for (int k = 0; k < 3; ++k) p.position[k] = round_to(q[k], spec.output_decimals);
  p.radial_velocity = round_to(v_noisy, spec.output_decimals);
  p.rcs = round_to(rcs, 2);
  p.timestamp_ns = stamp_ns;
  return p;
}

ordered_json pose_json(const Pose& pose) {
  // Angles are rounded to 1e-9 deg so that writing a loaded config again
  // reproduces the same text.
  const Eigen::Vector3d rpy = rpy_of(pose.rotation_matrix());
  const auto deg = [](double rad) { return round_to(rad2deg(rad), 9) + 0.0; };
  return {{"x", pose.translation.x()},  {"y", pose.translation.y()},
          {"z", pose.translation.z()},  {"roll_deg", deg(rpy[0])},
          {"pitch_deg", deg(rpy[1])}, {"yaw_deg", deg(rpy[2])}};
}

Pose pose_from_json(const json& j, const Pose& base, const std::string& where) {
  check_keys(j, {"x", "y", "z", "roll_deg", "pitch_deg", "yaw_deg"}, where);
  const Eigen::Vector3d rpy = rpy_of(base.rotation_matrix());
  double x = base.translation.x(), y = base.translation.y(), z = base.translation.z();
  double roll = rad2deg(rpy[0]), pitch = rad2deg(rpy[1]), yaw = rad2deg(rpy[2]);
  read_field(j, "x", x, where);
  read_field(j, "y", y, where);
  read_field(j, "z", z, where);
  read_field(j, "roll_deg", roll, where);
  read_field(j, "pitch_deg", pitch, where);
  read_field(j, "yaw_deg", yaw, where);
  return Pose::from_xyz_rpy({x, y, z}, deg2rad(roll), deg2rad(pitch), deg2rad(yaw));
}

ordered_json radar_json(const RadarSpec& s) {
  return {{"azimuth_fov_deg", s.azimuth_fov_deg},
          {"elevation_fov_deg", s.elevation_fov_deg},
          {"max_range", s.max_range},
          {"frame_rate", s.frame_rate},
          {"points_per_frame", s.points_per_frame},
          {"range_noise_sigma", s.range_noise_sigma},
          {"angle_noise_sigma_deg", s.angle_noise_sigma_deg},
          {"velocity_noise_sigma", s.velocity_noise_sigma},
          {"min_points_per_vehicle", s.min_points_per_vehicle},
          {"max_points_per_vehicle", s.max_points_per_vehicle},
          {"output_decimals", s.output_decimals}};
}

RadarSpec radar_from_json(const json& j, RadarSpec s, const std::string& where) {
  check_keys(j,
             {"azimuth_fov_deg", "elevation_fov_deg", "max_range", "frame_rate", "points_per_frame",
              "range_noise_sigma", "angle_noise_sigma_deg", "velocity_noise_sigma",
              "min_points_per_vehicle", "max_points_per_vehicle", "output_decimals"},
             where);
  read_field(j, "azimuth_fov_deg", s.azimuth_fov_deg, where);
  read_field(j, "elevation_fov_deg", s.elevation_fov_deg, where);
  read_field(j, "max_range", s.max_range, where);
  read_field(j, "frame_rate", s.frame_rate, where);
  read_field(j, "points_per_frame", s.points_per_frame, where);
  read_field(j, "range_noise_sigma", s.range_noise_sigma, where);
  read_field(j, "angle_noise_sigma_deg", s.angle_noise_sigma_deg, where);
  read_field(j, "velocity_noise_sigma", s.velocity_noise_sigma, where);
  read_field(j, "min_points_per_vehicle", s.min_points_per_vehicle, where);
  read_field(j, "max_points_per_vehicle", s.max_points_per_vehicle, where);
  read_field(j, "output_decimals", s.output_decimals, where);
  return s;
}

ordered_json sensor_json(const SensorConfig& s) {
  return {{"id", s.id},
          {"pose", pose_json(s.pose)},
          {"radar", radar_json(s.spec)},
          {"clock",
           {{"offset_ns", s.clock.offset_ns},
            {"drift", s.clock.drift},
            {"jitter_ns", s.clock.jitter_ns},
            {"reference_ns", s.clock.reference_ns}}},
          {"hint",
           {{"x", s.position_hint.x()},
            {"y", s.position_hint.y()},
            {"heading", s.heading_hint},
            {"height", s.height_hint}}}};
}

SensorConfig sensor_from_json(const json& j, const std::string& where) {
  check_keys(j, {"id", "pose", "radar", "clock", "hint"}, where);
  SensorConfig s;
  read_field(j, "id", s.id, where);
  if (j.contains("pose")) s.pose = pose_from_json(j["pose"], s.pose, where + ".pose");
  if (j.contains("radar")) s.spec = radar_from_json(j["radar"], s.spec, where + ".radar");
  if (j.contains("clock")) {
    const auto& c = j["clock"];
    const std::string w = where + ".clock";
    check_keys(c, {"offset_ns", "drift", "jitter_ns", "reference_ns"}, w);
    read_field(c, "offset_ns", s.clock.offset_ns, w);
    read_field(c, "drift", s.clock.drift, w);
    read_field(c, "jitter_ns", s.clock.jitter_ns, w);
    read_field(c, "reference_ns", s.clock.reference_ns, w);
  }
  if (j.contains("hint")) {
    const auto& h = j["hint"];
    const std::string w = where + ".hint";
    check_keys(h, {"x", "y", "heading", "height"}, w);
    read_field(h, "x", s.position_hint.x(), w);
    read_field(h, "y", s.position_hint.y(), w);
    read_field(h, "heading", s.heading_hint, w);
    read_field(h, "height", s.height_hint, w);
  }
  return s;
}

}  // namespace

void validate(const RadarSpec& spec) {
  positive(spec.azimuth_fov_deg, "radar.azimuth_fov_deg");
  if (spec.azimuth_fov_deg > 360.0) throw ConfigError("simulator: radar.azimuth_fov_deg must be <= 360");
  positive(spec.elevation_fov_deg, "radar.elevation_fov_deg");
  if (spec.elevation_fov_deg > 180.0) {
    throw ConfigError("simulator: radar.elevation_fov_deg must be <= 180");
  }
  positive(spec.max_range, "radar.max_range");
  positive(spec.frame_rate, "radar.frame_rate");
  positive(spec.points_per_frame, "radar.points_per_frame");
  non_negative(spec.range_noise_sigma, "radar.range_noise_sigma");
  non_negative(spec.angle_noise_sigma_deg, "radar.angle_noise_sigma_deg");
  non_negative(spec.velocity_noise_sigma, "radar.velocity_noise_sigma");
  if (spec.min_points_per_vehicle < 1 || spec.max_points_per_vehicle < spec.min_points_per_vehicle) {
    throw ConfigError("simulator: radar points per vehicle must satisfy 1 <= min <= max");
  }
  if (spec.output_decimals > 9) throw ConfigError("simulator: radar.output_decimals must be <= 9");
}

std::optional<VehicleState> VehicleTrack::state_at(double t) const {
  if (waypoints.size() < 2 || t < start_time() || t >= end_time()) return std::nullopt;
  const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                   [](double value, const Waypoint& w) { return value < w.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double dt = b.t - a.t;
  const double s = (t - a.t) / dt;
  VehicleState state;
  state.position = a.position + s * (b.position - a.position);
  state.velocity = (b.position - a.position) / dt;
  state.heading = std::atan2(state.velocity.y(), state.velocity.x());
  return state;
}

VehicleTrack make_track(std::int64_t id, std::span<const Eigen::Vector2d> path, double t0,
                        double speed) {
  if (path.size() < 2) throw ConfigError("simulator: a track needs at least two path points");
  positive(speed, "track speed");
  return track_with_speeds(id, path, t0, std::vector<double>(path.size() - 1, speed));
}

namespace {

struct RoadCurve {
  std::function<Eigen::Vector2d(double)> point;
  std::function<Eigen::Vector2d(double)> tangent;
};

std::vector<double> sample_range(double from, double to, double step) {
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(to - from) / step)));
  std::vector<double> u(n + 1);
  for (int i = 0; i <= n; ++i) u[i] = from + (to - from) * i / n;
  u.back() = to;
  return u;
}

Eigen::Vector2d left_normal(const Eigen::Vector2d& t) { return {-t.y(), t.x()}; }

// Lane pieces of one road between parameters `from` and `to`; the forward
// lane lies right of the axis, the backward lane left of it.
Lanelet lane_piece(const RoadCurve& road, double from, double to, double width, bool forward,
                   LaneletKind kind) {
  Lanelet l;
  l.kind = kind;
  const auto us = forward ? sample_range(from, to, 1.0) : sample_range(to, from, 1.0);
  for (const double u : us) {
    const Eigen::Vector2d c = road.point(u);
    const Eigen::Vector2d n = left_normal(road.tangent(u).normalized());
    l.left.push_back(c);
    l.right.push_back(forward ? Eigen::Vector2d(c - width * n) : Eigen::Vector2d(c + width * n));
  }
  return l;
}

Eigen::Vector2d end_heading(const std::vector<Eigen::Vector2d>& line) {
  return (line.back() - line[line.size() - 2]).normalized();
}

Eigen::Vector2d start_heading(const std::vector<Eigen::Vector2d>& line) {
  return (line[1] - line[0]).normalized();
}

std::vector<Eigen::Vector2d> bezier_join(const Eigen::Vector2d& p0, const Eigen::Vector2d& h0,
                                         const Eigen::Vector2d& p3, const Eigen::Vector2d& h3) {
  // Handle length 0.4 * chord approximates a circular arc for turns near 90 deg.
  const double k = 0.4 * (p3 - p0).norm();
  const Eigen::Vector2d p1 = p0 + k * h0;
  const Eigen::Vector2d p2 = p3 - k * h3;
  constexpr int kSegments = 30;
  std::vector<Eigen::Vector2d> out(kSegments + 1);
  for (int i = 0; i <= kSegments; ++i) {
    const double t = static_cast<double>(i) / kSegments;
    const double s = 1.0 - t;
    out[i] = s * s * s * p0 + 3 * s * s * t * p1 + 3 * s * t * t * p2 + t * t * t * p3;
  }
  out.front() = p0;
  out.back() = p3;
  return out;
}

Lanelet turn_between(const Lanelet& from, const Lanelet& to) {
  Lanelet l;
  l.kind = LaneletKind::turn;
  l.left = bezier_join(from.left.back(), end_heading(from.left), to.left.front(),
                       start_heading(to.left));
  l.right = bezier_join(from.right.back(), end_heading(from.right), to.right.front(),
                        start_heading(to.right));
  return l;
}

}  // namespace

LaneletMap intersection_map(const IntersectionParams& p) {
  positive(p.lane_width, "intersection.lane_width");
  non_negative(p.road_a_amplitude, "intersection.road_a_amplitude");
  positive(p.road_a_wavelength, "intersection.road_a_wavelength");
  non_negative(p.road_b_amplitude, "intersection.road_b_amplitude");
  positive(p.road_b_wavelength, "intersection.road_b_wavelength");
  non_negative(p.road_b_radius, "intersection.road_b_radius");
  positive(p.junction_half_length, "intersection.junction_half_length");
  if (!(p.crossing_angle_deg >= 20.0 && p.crossing_angle_deg <= 160.0)) {
    throw ConfigError("simulator: intersection.crossing_angle_deg must be in [20, 160]");
  }
  const double d = p.junction_half_length;
  if (!(p.road_a_start < -d && p.road_a_end > d && p.road_b_start < -d && p.road_b_end > d)) {
    throw ConfigError("simulator: intersection roads must extend past the junction on both sides");
  }
  // Centerline u * dir + (amp * sin(k u) + u^2 / (2 radius)) * normal.
  const auto wavy = [](const Eigen::Vector2d& dir, double amp, double wavelength, double radius) {
    const double k = 2.0 * std::numbers::pi / wavelength;
    const double bend = radius > 0.0 ? 1.0 / radius : 0.0;
    const Eigen::Vector2d n = left_normal(dir);
    return RoadCurve{
        [=](double u) -> Eigen::Vector2d {
          return u * dir + (amp * std::sin(k * u) + 0.5 * bend * u * u) * n;
        },
        [=](double u) -> Eigen::Vector2d {
          return dir + (amp * k * std::cos(k * u) + bend * u) * n;
        }};
  };
  const double angle = deg2rad(p.crossing_angle_deg);
  const RoadCurve road_a =
      wavy(Eigen::Vector2d::UnitX(), p.road_a_amplitude, p.road_a_wavelength, 0.0);
  const RoadCurve road_b = wavy(Eigen::Vector2d(std::cos(angle), std::sin(angle)),
                                p.road_b_amplitude, p.road_b_wavelength, p.road_b_radius);

  LaneletMap map;
  map.origin = {0.0, 0.0, ""};
  const std::array<std::pair<const RoadCurve*, std::pair<double, double>>, 2> roads = {
      std::pair{&road_a, std::pair{p.road_a_start, p.road_a_end}},
      std::pair{&road_b, std::pair{p.road_b_start, p.road_b_end}}};
  // approach[road][dir], exit[road][dir]; dir 0 = forward, 1 = backward.
  // A road that ends at the junction has no approach on its forward lane and
  // no exit on its backward lane.
  std::array<std::array<std::optional<Lanelet>, 2>, 2> approach;
  std::array<std::array<std::optional<Lanelet>, 2>, 2> exit;
  std::int64_t id = 1;
  for (int r = 0; r < 2; ++r) {
    const RoadCurve& road = *roads[r].first;
    const auto [start, end] = roads[r].second;
    const bool through = r == 0 || p.road_b_through;
    for (int dir = 0; dir < 2; ++dir) {
      const bool fwd = dir == 0;
      const auto add = [&](Lanelet l) {
        l.id = id++;
        map.lanelets.push_back(l);
        return l;
      };
      if (fwd) {
        if (through) approach[r][dir] = add(lane_piece(road, start, -d, p.lane_width, true, LaneletKind::driving));
        if (through) add(lane_piece(road, -d, d, p.lane_width, true, LaneletKind::junction));
        exit[r][dir] = add(lane_piece(road, d, end, p.lane_width, true, LaneletKind::driving));
      } else {
        approach[r][dir] = add(lane_piece(road, d, end, p.lane_width, false, LaneletKind::driving));
        if (through) add(lane_piece(road, -d, d, p.lane_width, false, LaneletKind::junction));
        if (through) exit[r][dir] = add(lane_piece(road, start, -d, p.lane_width, false, LaneletKind::driving));
      }
    }
  }
  using Link = std::pair<std::pair<int, int>, std::pair<int, int>>;
  // With road B left of road A, a right turn from A forward leads onto B
  // backward, from B forward onto A forward, and so on around the junction.
  const std::array<Link, 4> right = {{{{0, 0}, {1, 1}}, {{1, 0}, {0, 0}}, {{0, 1}, {1, 0}}, {{1, 1}, {0, 1}}}};
  const std::array<Link, 4> left = {{{{0, 0}, {1, 0}}, {{1, 0}, {0, 1}}, {{0, 1}, {1, 1}}, {{1, 1}, {0, 0}}}};
  const auto add_turns = [&](const std::array<Link, 4>& links) {
    for (const auto& [from, to] : links) {
      const auto& in = approach[from.first][from.second];
      const auto& out = exit[to.first][to.second];
      if (!in || !out) continue;
      Lanelet t = turn_between(*in, *out);
      t.id = id++;
      map.lanelets.push_back(std::move(t));
    }
  };
  if (p.right_turns) add_turns(right);
  if (p.left_turns) add_turns(left);
  for (const auto& l : map.lanelets) validate_lanelet(l);
  return map;
}

ScenarioConfig intersection_scenario() {
  ScenarioConfig cfg;
  cfg.name = "intersection";

  // Both sensors stand beside an approach and look down it toward the junction.
  SensorConfig r1;
  r1.id = "radar_1";
  // Positive pitch tilts the boresight below the horizon.
  r1.pose = Pose::from_xyz_rpy({-70.0, -10.0, 6.0}, 0.0, deg2rad(3.0), deg2rad(4.0));
  r1.position_hint = {-66.0, -7.0};
  r1.heading_hint = "E";
  r1.height_hint = 6.0;
  r1.clock.jitter_ns = 1'000'000;

  SensorConfig r2;
  r2.id = "radar_2";
  r2.pose = Pose::from_xyz_rpy({-8.0, 78.0, 6.0}, 0.0, deg2rad(3.0), deg2rad(-85.0));
  r2.position_hint = {-5.0, 74.0};
  r2.heading_hint = "S";
  r2.height_hint = 6.0;
  r2.clock.offset_ns = 20'000'000;
  r2.clock.jitter_ns = 1'000'000;

  cfg.sensors = {r1, r2};
  cfg.canopies = {
      {{20.0, 9.0, 6.0}, 2.5},  {{-12.0, -9.0, 6.5}, 2.0}, {{70.0, -9.0, 6.0}, 2.5},
      {{22.0, 33.0, 6.0}, 2.5}, {{-25.0, 12.0, 6.0}, 2.0},
  };
  return cfg;
}

void validate(const ScenarioConfig& cfg) {
  positive(cfg.polygon_step, "polygon_step");
  positive(cfg.duration_s, "duration_s");
  if (cfg.map_file.empty()) intersection_map(cfg.intersection);
  if (cfg.sensors.empty()) throw ConfigError("simulator: at least one sensor is required");
  for (std::size_t i = 0; i < cfg.sensors.size(); ++i) {
    const auto& s = cfg.sensors[i];
    if (s.id.empty()) throw ConfigError("simulator: sensor id must not be empty");
    if (s.id.find_first_of("/\\ ,") != std::string::npos) {
      throw ConfigError("simulator: sensor id '" + s.id + "' contains a path or list separator");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (cfg.sensors[k].id == s.id) throw ConfigError("simulator: duplicate sensor id " + s.id);
    }
    validate(s.spec);
    if (!is_finite(s.pose.translation)) throw ConfigError("simulator: sensor pose not finite");
    if (s.clock.jitter_ns < 0) throw ConfigError("simulator: clock jitter must be >= 0");
    if (2.0 * static_cast<double>(s.clock.jitter_ns) >= 1e9 / s.spec.frame_rate) {
      throw ConfigError("simulator: clock jitter must be below half a frame period");
    }
    try {
      parse_compass(s.heading_hint);
    } catch (const ConfigError&) {
      throw ConfigError("simulator: unknown heading hint '" + s.heading_hint + "' for " + s.id);
    }
  }
  const auto& t = cfg.traffic;
  non_negative(t.arrival_rate, "traffic.arrival_rate");
  positive(t.speed_mean, "traffic.speed_mean");
  non_negative(t.speed_sigma, "traffic.speed_sigma");
  positive(t.speed_min, "traffic.speed_min");
  non_negative(t.speed_variation, "traffic.speed_variation");
  if (t.speed_variation >= 1.0) throw ConfigError("simulator: traffic.speed_variation must be < 1");
  positive(t.segment_length, "traffic.segment_length");
  non_negative(t.lateral_fraction, "traffic.lateral_fraction");
  if (t.lateral_fraction > 1.0) throw ConfigError("simulator: traffic.lateral_fraction must be <= 1");
  positive(t.vehicle_length, "traffic.vehicle_length");
  positive(t.vehicle_width, "traffic.vehicle_width");
  positive(t.vehicle_height, "traffic.vehicle_height");

  const auto& c = cfg.clutter;
  if (c.static_fraction && !(*c.static_fraction >= 0.0 && *c.static_fraction < 1.0)) {
    throw ConfigError("simulator: clutter.static_fraction must be in [0, 1) or null");
  }
  if (!(c.dynamic_fraction >= 0.0 && c.dynamic_fraction < 1.0)) {
    throw ConfigError("simulator: clutter.dynamic_fraction must be in [0, 1)");
  }
  non_negative(c.canopy_speed, "clutter.canopy_speed");
  positive(c.static_speed_limit, "clutter.static_speed_limit");
  non_negative(c.min_range, "clutter.min_range");
  positive(c.static_max_range, "clutter.static_max_range");

  const auto& s = cfg.scan;
  positive(s.density, "scan.density");
  non_negative(s.noise_sigma, "scan.noise_sigma");
  non_negative(s.offroad_density, "scan.offroad_density");
  non_negative(s.offroad_margin, "scan.offroad_margin");
  if (s.canopy_points < 0) throw ConfigError("simulator: scan.canopy_points must be >= 0");
  for (const auto& canopy : cfg.canopies) positive(canopy.radius, "canopy radius");
}

LaneletMap resolve_map(const ScenarioConfig& cfg) {
  if (!cfg.map_file.empty()) return load_map(cfg.map_file);
  return intersection_map(cfg.intersection);
}

ordered_json to_json(const ScenarioConfig& cfg) {
  ordered_json sensors = ordered_json::array();
  for (const auto& s : cfg.sensors) sensors.push_back(sensor_json(s));
  ordered_json canopies = ordered_json::array();
  for (const auto& c : cfg.canopies) {
    canopies.push_back(
        {{"x", c.center.x()}, {"y", c.center.y()}, {"z", c.center.z()}, {"radius", c.radius}});
  }
  const auto& i = cfg.intersection;
  const auto& t = cfg.traffic;
  const auto& c = cfg.clutter;
  const auto& s = cfg.scan;
  return {
      {"name", cfg.name},
      {"map_file", cfg.map_file},
      {"intersection",
       {{"lane_width", i.lane_width},
        {"crossing_angle_deg", i.crossing_angle_deg},
        {"road_a_start", i.road_a_start},
        {"road_a_end", i.road_a_end},
        {"road_b_start", i.road_b_start},
        {"road_b_end", i.road_b_end},
        {"road_a_amplitude", i.road_a_amplitude},
        {"road_a_wavelength", i.road_a_wavelength},
        {"road_b_amplitude", i.road_b_amplitude},
        {"road_b_wavelength", i.road_b_wavelength},
        {"road_b_radius", i.road_b_radius},
        {"junction_half_length", i.junction_half_length},
        {"right_turns", i.right_turns},
        {"left_turns", i.left_turns},
        {"road_b_through", i.road_b_through}}},
      {"polygon_step", cfg.polygon_step},
      {"duration_s", cfg.duration_s},
      {"sensors", sensors},
      {"traffic",
       {{"arrival_rate", t.arrival_rate},
        {"speed_mean", t.speed_mean},
        {"speed_sigma", t.speed_sigma},
        {"speed_min", t.speed_min},
        {"speed_variation", t.speed_variation},
        {"segment_length", t.segment_length},
        {"lateral_fraction", t.lateral_fraction},
        {"vehicle_length", t.vehicle_length},
        {"vehicle_width", t.vehicle_width},
        {"vehicle_height", t.vehicle_height}}},
      {"clutter",
       {{"static_fraction", detail::optional_json(c.static_fraction)},
        {"dynamic_fraction", c.dynamic_fraction},
        {"canopy_speed", c.canopy_speed},
        {"static_speed_limit", c.static_speed_limit},
        {"min_range", c.min_range},
        {"static_max_range", c.static_max_range}}},
      {"scan",
       {{"density", s.density},
        {"noise_sigma", s.noise_sigma},
        {"road_height", s.road_height},
        {"offroad_density", s.offroad_density},
        {"offroad_margin", s.offroad_margin},
        {"canopy_points", s.canopy_points},
        {"output_decimals", s.output_decimals}}},
      {"canopies", canopies},
  };
}

ScenarioConfig scenario_from_json(const json& j, const ScenarioConfig& base) {
  const std::string w = "scenario";
  check_keys(j,
             {"name", "map_file", "intersection", "polygon_step", "duration_s", "seed", "sensors",
              "traffic", "clutter", "scan", "canopies"},
             w);
  ScenarioConfig cfg = base;
  read_field(j, "name", cfg.name, w);
  read_field(j, "map_file", cfg.map_file, w);
  read_field(j, "polygon_step", cfg.polygon_step, w);
  read_field(j, "duration_s", cfg.duration_s, w);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("scenario.seed: expected an unsigned integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("intersection")) {
    const auto& i = j["intersection"];
    const std::string wi = w + ".intersection";
    check_keys(i, {"lane_width", "crossing_angle_deg", "road_a_start", "road_a_end", "road_b_start",
                   "road_b_end", "road_a_amplitude", "road_a_wavelength", "road_b_amplitude", "road_b_wavelength",
                   "road_b_radius",
                   "junction_half_length", "right_turns", "left_turns", "road_b_through"},
               wi);
    read_field(i, "lane_width", cfg.intersection.lane_width, wi);
    read_field(i, "crossing_angle_deg", cfg.intersection.crossing_angle_deg, wi);
    read_field(i, "road_a_start", cfg.intersection.road_a_start, wi);
    read_field(i, "road_a_end", cfg.intersection.road_a_end, wi);
    read_field(i, "road_b_start", cfg.intersection.road_b_start, wi);
    read_field(i, "road_b_end", cfg.intersection.road_b_end, wi);
    read_field(i, "road_a_amplitude", cfg.intersection.road_a_amplitude, wi);
    read_field(i, "road_a_wavelength", cfg.intersection.road_a_wavelength, wi);
    read_field(i, "road_b_amplitude", cfg.intersection.road_b_amplitude, wi);
    read_field(i, "road_b_wavelength", cfg.intersection.road_b_wavelength, wi);
    read_field(i, "road_b_radius", cfg.intersection.road_b_radius, wi);
    read_field(i, "junction_half_length", cfg.intersection.junction_half_length, wi);
    read_field(i, "right_turns", cfg.intersection.right_turns, wi);
    read_field(i, "left_turns", cfg.intersection.left_turns, wi);
    read_field(i, "road_b_through", cfg.intersection.road_b_through, wi);
  }
  if (j.contains("sensors")) {
    if (!j["sensors"].is_array()) throw ConfigError("scenario.sensors: expected an array");
    cfg.sensors.clear();
    for (std::size_t k = 0; k < j["sensors"].size(); ++k) {
      cfg.sensors.push_back(
          sensor_from_json(j["sensors"][k], w + ".sensors[" + std::to_string(k) + "]"));
    }
  }
  if (j.contains("traffic")) {
    const auto& t = j["traffic"];
    const std::string wt = w + ".traffic";
    check_keys(t, {"arrival_rate", "speed_mean", "speed_sigma", "speed_min", "speed_variation",
                   "segment_length", "lateral_fraction", "vehicle_length", "vehicle_width",
                   "vehicle_height"},
               wt);
    read_field(t, "arrival_rate", cfg.traffic.arrival_rate, wt);
    read_field(t, "speed_mean", cfg.traffic.speed_mean, wt);
    read_field(t, "speed_sigma", cfg.traffic.speed_sigma, wt);
    read_field(t, "speed_min", cfg.traffic.speed_min, wt);
    read_field(t, "speed_variation", cfg.traffic.speed_variation, wt);
    read_field(t, "segment_length", cfg.traffic.segment_length, wt);
    read_field(t, "lateral_fraction", cfg.traffic.lateral_fraction, wt);
    read_field(t, "vehicle_length", cfg.traffic.vehicle_length, wt);
    read_field(t, "vehicle_width", cfg.traffic.vehicle_width, wt);
    read_field(t, "vehicle_height", cfg.traffic.vehicle_height, wt);
  }
  if (j.contains("clutter")) {
    const auto& c = j["clutter"];
    const std::string wc = w + ".clutter";
    check_keys(c, {"static_fraction", "dynamic_fraction", "canopy_speed", "static_speed_limit",
                   "min_range", "static_max_range"},
               wc);
    read_field(c, "static_fraction", cfg.clutter.static_fraction, wc);
    read_field(c, "dynamic_fraction", cfg.clutter.dynamic_fraction, wc);
    read_field(c, "canopy_speed", cfg.clutter.canopy_speed, wc);
    read_field(c, "static_speed_limit", cfg.clutter.static_speed_limit, wc);
    read_field(c, "min_range", cfg.clutter.min_range, wc);
    read_field(c, "static_max_range", cfg.clutter.static_max_range, wc);
  }
  if (j.contains("scan")) {
    const auto& s = j["scan"];
    const std::string ws = w + ".scan";
    check_keys(s, {"density", "noise_sigma", "road_height", "offroad_density", "offroad_margin",
                   "canopy_points", "output_decimals"},
               ws);
    read_field(s, "density", cfg.scan.density, ws);
    read_field(s, "noise_sigma", cfg.scan.noise_sigma, ws);
    read_field(s, "road_height", cfg.scan.road_height, ws);
    read_field(s, "offroad_density", cfg.scan.offroad_density, ws);
    read_field(s, "offroad_margin", cfg.scan.offroad_margin, ws);
    read_field(s, "canopy_points", cfg.scan.canopy_points, ws);
    read_field(s, "output_decimals", cfg.scan.output_decimals, ws);
  }
  if (j.contains("canopies")) {
    if (!j["canopies"].is_array()) throw ConfigError("scenario.canopies: expected an array");
    cfg.canopies.clear();
    for (std::size_t k = 0; k < j["canopies"].size(); ++k) {
      const auto& c = j["canopies"][k];
      const std::string wc = w + ".canopies[" + std::to_string(k) + "]";
      check_keys(c, {"x", "y", "z", "radius"}, wc);
      Canopy canopy;
      read_field(c, "x", canopy.center.x(), wc);
      read_field(c, "y", canopy.center.y(), wc);
      read_field(c, "z", canopy.center.z(), wc);
      read_field(c, "radius", canopy.radius, wc);
      cfg.canopies.push_back(canopy);
    }
  }
  return cfg;
}

PointCloud generate_scan(const PolygonMap& map, const ScanParams& params,
                         std::span<const Canopy> canopies, std::mt19937_64& rng) {
  if (!(params.density > 0.0)) throw ConfigError("simulator: scan density must be positive");
  if (map.empty()) throw PipelineError("simulator: cannot scan an empty map");
  PointCloud scan;
  scan.frame_id = "map";
  const auto [lo, hi] = map.bounds();
  const int d = params.output_decimals;
  auto emit = [&](double x, double y, double z) {
    RadarPoint p;
    p.position = {round_to(x, d), round_to(y, d), round_to(z, d)};
    scan.points.push_back(p);
  };

  // Road: uniform over the bounding box, kept inside the polygon union.
  const Eigen::Vector2d extent = hi - lo;
  const std::int64_t n_road = poisson(rng, params.density * extent.x() * extent.y());
  for (std::int64_t i = 0; i < n_road; ++i) {
    const Eigen::Vector2d xy(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()));
    if (map.covers(xy)) emit(xy.x(), xy.y(), params.road_height + normal(rng, params.noise_sigma));
  }

  // Off-road ground around the road network.
  const Eigen::Vector2d olo = lo.array() - params.offroad_margin;
  const Eigen::Vector2d ohi = hi.array() + params.offroad_margin;
  const Eigen::Vector2d oext = ohi - olo;
  const std::int64_t n_off = poisson(rng, params.offroad_density * oext.x() * oext.y());
  for (std::int64_t i = 0; i < n_off; ++i) {
    const Eigen::Vector2d xy(uniform(rng, olo.x(), ohi.x()), uniform(rng, olo.y(), ohi.y()));
    if (!map.covers(xy)) emit(xy.x(), xy.y(), params.road_height + normal(rng, params.noise_sigma));
  }

  for (const auto& canopy : canopies) {
    const std::int64_t n = poisson(rng, params.canopy_points);
    for (std::int64_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p = uniform_in_ball(rng, canopy.center, canopy.radius);
      emit(p.x(), p.y(), p.z());
    }
  }
  return scan;
}

std::vector<VehicleTrack> simulate_traffic(const LaneletMap& map, const TrafficParams& params,
                                           double duration_s, std::mt19937_64& rng) {
  const auto routes = lanelet_routes(map);
  if (routes.empty()) throw PipelineError("simulator: map has no lanelet routes");

  std::vector<VehicleTrack> tracks;
  std::int64_t next_id = 0;
  for (std::size_t ri = 0; ri < routes.size(); ++ri) {
    if (params.arrival_rate <= 0.0) continue;
    const auto centerline = route_centerline(map, routes[ri], 1.0);
    const Lanelet& first = *map.find(routes[ri].front());
    const double length = polyline_length(centerline);
    const double lane_width = (first.left.front() - first.right.front()).norm();
    const double room =
        std::max(0.0, (lane_width - params.vehicle_width) / 2) * params.lateral_fraction;
    const double warmup = length / params.speed_min;

    std::exponential_distribution<double> gap(params.arrival_rate);
    for (double t0 = -warmup + gap(rng); t0 < duration_s; t0 += gap(rng)) {
      const double base_speed =
          std::max(params.speed_min, params.speed_mean + normal(rng, params.speed_sigma));
      const double offset = room > 0.0 ? uniform(rng, -room, room) : 0.0;
      const auto path = offset_path(centerline, offset);

      std::vector<double> speeds(path.size() - 1);
      double travelled = 0.0;
      double block_end = -1.0;
      double speed = base_speed;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (travelled >= block_end) {
          const double u = params.speed_variation > 0.0 ? uniform(rng, -1.0, 1.0) : 0.0;
          speed = std::max(params.speed_min, base_speed * (1.0 + u * params.speed_variation));
          block_end = travelled + params.segment_length;
        }
        speeds[i] = speed;
        travelled += (path[i + 1] - path[i]).norm();
      }

      VehicleTrack track = track_with_speeds(next_id++, path, t0, speeds);
      track.route = static_cast<std::int64_t>(ri);
      track.length = params.vehicle_length;
      track.width = params.vehicle_width;
      track.height = params.vehicle_height;
      if (track.end_time() > 0.0) tracks.push_back(std::move(track));
    }
  }
  return tracks;
}

PointCloud simulate_radar_frame(const FrameContext& ctx, double t, std::int64_t stamp_ns,
                                std::mt19937_64& rng) {
  const SensorConfig& sensor = *ctx.sensor;
  const RadarSpec& spec = sensor.spec;
  const ClutterParams default_clutter;
  const ClutterParams& clutter = ctx.clutter ? *ctx.clutter : default_clutter;
  const SensorView view(sensor);

  PointCloud frame;
  frame.frame_id = sensor.id;
  frame.stamp_ns = stamp_ns;

  std::int64_t vehicle_points = 0;
  std::uniform_int_distribution<std::int32_t> per_vehicle(spec.min_points_per_vehicle,
                                                          spec.max_points_per_vehicle);
  for (const auto& track : ctx.tracks) {
    const auto state = track.state_at(t);
    if (!state) continue;
    const Eigen::Vector3d center(state->position.x(), state->position.y(), track.height / 2);
    const double reach = 0.5 * std::hypot(track.length, track.width, track.height);
    if ((center - view.origin).norm() > spec.max_range + reach) continue;

    const auto faces = box_faces(track, *state);
    std::array<double, 5> weights{};
    double total = 0.0;
    for (std::size_t k = 0; k < faces.size(); ++k) {
      const Eigen::Vector3d to_sensor = view.origin - faces[k].center;
      const double cosine = faces[k].normal.dot(to_sensor) / to_sensor.norm();
      weights[k] = cosine > 0.0 ? faces[k].area * cosine : 0.0;
      total += weights[k];
    }
    if (total <= 0.0) continue;

    const Eigen::Vector3d velocity(state->velocity.x(), state->velocity.y(), 0.0);
    std::discrete_distribution<int> pick_face(weights.begin(), weights.end());
    const std::int32_t n = per_vehicle(rng);
    for (std::int32_t i = 0; i < n; ++i) {
      const Face& face = faces[pick_face(rng)];
      const Eigen::Vector3d p =
          face.center + uniform(rng, -1, 1) * face.u + uniform(rng, -1, 1) * face.v;
      const Eigen::Vector3d q = view.to_sensor(p);
      if (!view.in_fov(q)) continue;
      const double vr = velocity.dot((p - view.origin).normalized());
      frame.points.push_back(make_detection(view, q, vr, 10.0 + normal(rng, 3.0), stamp_ns, rng));
      ++vehicle_points;
    }
  }

  const double half_az = deg2rad(spec.azimuth_fov_deg) / 2;
  const double half_el = deg2rad(spec.elevation_fov_deg) / 2;
  auto random_direction = [&](double r_lo, double r_hi) {
    return from_spherical(uniform(rng, r_lo, r_hi), uniform(rng, -half_az, half_az),
                          uniform(rng, -half_el, half_el));
  };

  // Dynamic clutter: tree canopy returns.
  std::vector<const Canopy*> visible;
  for (const auto& c : ctx.canopies) {
    if (view.in_fov(view.to_sensor(c.center))) visible.push_back(&c);
  }
  if (clutter.dynamic_fraction > 0.0 && vehicle_points > 0 && !visible.empty()) {
    const double mean =
        static_cast<double>(vehicle_points) * clutter.dynamic_fraction / (1.0 - clutter.dynamic_fraction);
    const std::int64_t n = poisson(rng, mean);
    std::uniform_int_distribution<std::size_t> pick(0, visible.size() - 1);
    for (std::int64_t i = 0; i < n; ++i) {
      const Canopy& c = *visible[pick(rng)];
      const Eigen::Vector3d q = view.to_sensor(uniform_in_ball(rng, c.center, c.radius));
      if (!view.in_fov(q)) continue;
      const double vr = uniform(rng, -clutter.canopy_speed, clutter.canopy_speed);
      frame.points.push_back(make_detection(view, q, vr, -8.0 + normal(rng, 3.0), stamp_ns, rng));
    }
  }

  // Static clutter, sized to reach the configured below-gate share.
  std::int64_t above = 0;
  for (const auto& p : frame.points) {
    if (std::abs(p.radial_velocity) > clutter.static_speed_limit) ++above;
  }
  const auto below = static_cast<std::int64_t>(frame.points.size()) - above;
  double mean_static = 0.0;
  if (clutter.static_fraction) {
    const double f = *clutter.static_fraction;
    mean_static = static_cast<double>(above) * f / (1.0 - f) - static_cast<double>(below);
  } else {
    mean_static = spec.points_per_frame - static_cast<double>(frame.points.size());
  }
  const std::int64_t n_static = poisson(rng, mean_static);
  const double v_cap = 0.9 * clutter.static_speed_limit;
  const double r_hi = std::min(clutter.static_max_range, spec.max_range);
  for (std::int64_t i = 0; i < n_static; ++i) {
    const Eigen::Vector3d q = random_direction(std::min(clutter.min_range, r_hi), r_hi);
    RadarPoint p;
    for (int k = 0; k < 3; ++k) p.position[k] = round_to(q[k], spec.output_decimals);
    p.radial_velocity = round_to(
        std::clamp(normal(rng, std::max(spec.velocity_noise_sigma, 0.02)), -v_cap, v_cap),
        spec.output_decimals);
    p.rcs = round_to(normal(rng, 6.0), 2);
    p.timestamp_ns = stamp_ns;
    frame.points.push_back(p);
  }
  return frame;
}

Dataset run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  Dataset data;
  data.config = cfg;
  data.map = resolve_map(cfg);
  const PolygonMap polygons = build_polygon_map(data.map.lanelets, cfg.polygon_step);

  auto scan_rng = make_rng(cfg.seed, Stream::scan);
  data.scan = generate_scan(polygons, cfg.scan, cfg.canopies, scan_rng);

  auto traffic_rng = make_rng(cfg.seed, Stream::traffic);
  data.tracks = simulate_traffic(data.map, cfg.traffic, cfg.duration_s, traffic_rng);

  data.frames.resize(cfg.sensors.size());
  for (std::size_t s = 0; s < cfg.sensors.size(); ++s) {
    SensorConfig sensor = cfg.sensors[s];
    sensor.clock.seed = cfg.seed;
    auto rng = make_rng(cfg.seed, Stream::sensor, s);
    const FrameContext ctx{&sensor, data.tracks, &cfg.clutter, cfg.canopies};
    const auto n_frames =
        static_cast<std::int64_t>(std::floor(cfg.duration_s * sensor.spec.frame_rate + 1e-9));
    auto& frames = data.frames[s];
    frames.reserve(n_frames);
    for (std::int64_t k = 0; k < n_frames; ++k) {
      const double t = static_cast<double>(k) / sensor.spec.frame_rate;
      const auto t_ns = static_cast<std::int64_t>(std::llround(t * 1e9));
      const std::int64_t stamp = skewed_clock(sensor.id, t_ns, sensor.clock);
      frames.push_back(simulate_radar_frame(ctx, t, stamp, rng));
    }
  }
  return data;
}

void save_poses(const std::filesystem::path& path, std::span<const SensorPose> poses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("simulator: cannot write " + path.string());
  out << "sensor_id,x,y,z,qx,qy,qz,qw\n";
  for (const auto& [id, pose] : poses) {
    const Eigen::Quaterniond q = canonical(pose.rotation);
    out << id << ',' << format_double(pose.translation.x()) << ','
        << format_double(pose.translation.y()) << ',' << format_double(pose.translation.z())
        << ',' << format_double(q.x()) << ',' << format_double(q.y()) << ','
        << format_double(q.z()) << ',' << format_double(q.w()) << '\n';
  }
}

std::vector<SensorPose> load_poses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot read pose file " + path.string());
  std::vector<SensorPose> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("sensor_id", 0) == 0 || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string id;
    std::getline(ss, id, ',');
    std::array<double, 7> v{};
    std::size_t got = 0;
    std::string field;
    while (got < v.size() && std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        v[got] = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw PipelineError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                            field + "'");
      }
      ++got;
    }
    if (got != v.size() || std::getline(ss, field, ',')) {
      throw PipelineError(path.string() + ":" + std::to_string(line_no) +
                          ": expected sensor_id,x,y,z,qx,qy,qz,qw");
    }
    SensorPose sp;
    sp.sensor_id = id;
    sp.pose.translation = {v[0], v[1], v[2]};
    sp.pose.rotation = Eigen::Quaterniond(v[6], v[3], v[4], v[5]).normalized();
    poses.push_back(std::move(sp));
  }
  return poses;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  {
    ordered_json j = to_json(data.config);
    j["seed"] = data.config.seed;
    std::ofstream out(dir / "scenario.json", std::ios::binary);
    if (!out) throw PipelineError("simulator: cannot write " + (dir / "scenario.json").string());
    out << j.dump(2) << '\n';
  }
  save_map(dir / "map.json", data.map);
  save_cloud(dir / "scan.csv", data.scan);
  std::vector<SensorPose> truth;
  for (const auto& s : data.config.sensors) truth.push_back({s.id, s.pose});
  save_poses(dir / "truth.csv", truth);
  for (std::size_t s = 0; s < data.config.sensors.size(); ++s) {
    save_frames(dir / ("frames_" + data.config.sensors[s].id + ".csv"), data.frames[s]);
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  const auto scenario_path = dir / "scenario.json";
  std::ifstream in(scenario_path, std::ios::binary);
  if (!in) throw PipelineError("dataset: cannot read " + scenario_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw PipelineError("dataset: " + scenario_path.string() + ": " + e.what());
  }
  try {
    data.config = scenario_from_json(j, ScenarioConfig{});
  } catch (const ConfigError& e) {
    throw PipelineError(std::string("dataset: ") + e.what());
  }
  data.map = load_map(dir / "map.json");
  data.scan = load_cloud(dir / "scan.csv");
  for (const auto& s : data.config.sensors) {
    const auto path = dir / ("frames_" + s.id + ".csv");
    if (!std::filesystem::exists(path)) {
      throw PipelineError("dataset: missing frame file " + path.string());
    }
    data.frames.push_back(load_frames(path));
  }
  return data;
}

}  // namespace roadreg
