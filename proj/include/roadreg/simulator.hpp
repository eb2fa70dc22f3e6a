// Synthetic worlds: lanelet road networks, vehicle traffic, roadside radar
// frames with noise, clutter and clock skew, and aerial-scan-style road
// point clouds.
//
// Dataset directory layout written by save_dataset:
//
//   scenario.json       resolved scenario configuration
//   map.json            lanelet map
//   scan.csv            laser-scan cloud, map frame
//   truth.csv           sensor_id,x,y,z,qx,qy,qz,qw
//   frames_<id>.csv     radar frame sequence per sensor, sensor frame

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "roadreg/geometry.hpp"
#include "roadreg/lanelet_map.hpp"
#include "roadreg/occupancy.hpp"

namespace roadreg {

struct RadarSpec {
  double azimuth_fov_deg = 120.0;
  double elevation_fov_deg = 30.0;
  double max_range = 300.0;
  double frame_rate = 20.0;
  /// Detections per frame when the static clutter fraction is unset.
  double points_per_frame = 500.0;
  double range_noise_sigma = 0.1;
  double angle_noise_sigma_deg = 0.1;
  double velocity_noise_sigma = 0.05;
  std::int32_t min_points_per_vehicle = 3;
  std::int32_t max_points_per_vehicle = 10;
  /// Reported values are rounded to this many decimals (positions in m,
  /// velocities in m/s); negative keeps full precision.
  std::int32_t output_decimals = 3;
};

/// Throws ConfigError on non-positive or out-of-range values.
void validate(const RadarSpec& spec);

struct SensorConfig {
  std::string id;
  RadarSpec spec;
  /// Ground truth: sensor frame to map frame.
  Pose pose;
  ClockModel clock;
  /// Coarse manual placement used to seed localization.
  Eigen::Vector2d position_hint = Eigen::Vector2d::Zero();
  std::string heading_hint = "E";
  double height_hint = 0.0;
};

struct Waypoint {
  double t = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  /// Speed on the segment that starts here (0 at the last waypoint).
  double speed = 0.0;
};

struct VehicleState {
  Eigen::Vector2d position;
  Eigen::Vector2d velocity;
  double heading = 0.0;
};

struct VehicleTrack {
  std::int64_t id = 0;
  std::int64_t route = 0;
  std::vector<Waypoint> waypoints;
  double length = 4.5;
  double width = 1.8;
  double height = 1.5;

  double start_time() const { return waypoints.front().t; }
  double end_time() const { return waypoints.back().t; }
  /// Empty outside [start_time, end_time).
  std::optional<VehicleState> state_at(double t) const;
};

/// Constant-speed track along a path, starting at t0.
VehicleTrack make_track(std::int64_t id, std::span<const Eigen::Vector2d> path, double t0,
                        double speed);

struct TrafficParams {
  /// Poisson arrivals per route, vehicles per second.
  double arrival_rate = 0.08;
  double speed_mean = 12.0;
  double speed_sigma = 2.0;
  double speed_min = 3.0;
  /// Each block of segment_length meters gets speed * (1 + u * variation),
  /// u uniform in [-1, 1].
  double speed_variation = 0.1;
  double segment_length = 25.0;
  /// Fraction of the free lateral room (lane width minus vehicle width) used
  /// for the random offset from the centerline.
  double lateral_fraction = 1.0;
  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
  double vehicle_height = 1.5;
};

struct Canopy {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 2.0;
};

struct ClutterParams {
  /// Target share of detections at or below static_speed_limit. When unset,
  /// static clutter fills each frame up to points_per_frame.
  std::optional<double> static_fraction = 0.93;
  /// Share of non-static detections that are tree canopy clutter. None is
  /// emitted when no canopy is in the field of view.
  double dynamic_fraction = 0.05;
  double canopy_speed = 1.0;
  double static_speed_limit = 0.15;
  double min_range = 5.0;
  double static_max_range = 150.0;
};

struct ScanParams {
  double density = 20.0;  // points per m^2 of road
  double noise_sigma = 0.02;
  double road_height = 0.0;
  double offroad_density = 2.0;
  /// Off-road ground is sampled this far around the road bounds.
  double offroad_margin = 15.0;
  std::int32_t canopy_points = 400;
  std::int32_t output_decimals = 3;
};

/// Two two-lane roads crossing at the origin. Road A runs along +x with a
/// sinusoidal lateral offset; road B leaves at crossing_angle_deg with its
/// own sinusoidal offset and an optional bend. Each lane is split into
/// approach, junction and exit lanelets at +/- junction_half_length along
/// its road. right_turns and left_turns add turn lanelets joining each
/// approach to the exit lane on that side. Lanes of the same road run in opposite
/// directions, right-hand traffic.
struct IntersectionParams {
  double lane_width = 3.5;
  double crossing_angle_deg = 90.0;
  double road_a_start = -120.0;
  double road_a_end = 160.0;
  double road_b_start = -100.0;
  double road_b_end = 140.0;
  double road_a_amplitude = 8.0;
  double road_a_wavelength = 120.0;
  double road_b_amplitude = 0.0;
  double road_b_wavelength = 150.0;
  /// Bend radius of road B; 0 keeps it unbent.
  double road_b_radius = 150.0;
  double junction_half_length = 15.0;
  bool right_turns = true;
  bool left_turns = false;
  /// False makes a T-junction: road B starts at the junction and only its
  /// part beyond +junction_half_length exists.
  bool road_b_through = true;
};

LaneletMap intersection_map(const IntersectionParams& params);

struct ScenarioConfig {
  std::string name = "intersection";
  IntersectionParams intersection;
  /// When set, the map is read from this file instead of the preset.
  std::string map_file;
  double polygon_step = 0.5;
  double duration_s = 100.0;
  std::uint64_t seed = 1;
  std::vector<SensorConfig> sensors;
  TrafficParams traffic;
  ClutterParams clutter;
  ScanParams scan;
  std::vector<Canopy> canopies;
};

/// The bundled intersection scene: two sensors, two crossing roads with
/// right turns, five canopies.
ScenarioConfig intersection_scenario();

/// Throws ConfigError describing the first invalid field.
void validate(const ScenarioConfig& cfg);

LaneletMap resolve_map(const ScenarioConfig& cfg);

nlohmann::ordered_json to_json(const ScenarioConfig& cfg);
/// Fields missing from `j` keep the values of `base`.
ScenarioConfig scenario_from_json(const nlohmann::json& j, const ScenarioConfig& base);

/// Road points sampled uniformly over the union of the map polygons with
/// Gaussian vertical noise, off-road ground around it, and canopy blobs.
/// Throws ConfigError when density <= 0.
PointCloud generate_scan(const PolygonMap& map, const ScanParams& params,
                         std::span<const Canopy> canopies, std::mt19937_64& rng);

/// Poisson arrivals on every lanelet route over [-warm-up, duration), where
/// the warm-up fills the road before t = 0. VehicleTrack::route is the index
/// into lanelet_routes(map). Throws PipelineError when the map has no routes.
std::vector<VehicleTrack> simulate_traffic(const LaneletMap& map, const TrafficParams& params,
                                           double duration_s, std::mt19937_64& rng);

struct FrameContext {
  const SensorConfig* sensor = nullptr;
  std::span<const VehicleTrack> tracks;
  const ClutterParams* clutter = nullptr;
  std::span<const Canopy> canopies;
};

/// One radar frame at true time t (seconds) in the sensor frame, stamped
/// with `stamp_ns` (frame and points). Vehicle boxes reflect 3 to 10 points
/// from faces that face the sensor; radial velocity is the line-of-sight
/// projection of the vehicle velocity. Occlusion is not modelled.
PointCloud simulate_radar_frame(const FrameContext& ctx, double t, std::int64_t stamp_ns,
                                std::mt19937_64& rng);

struct Dataset {
  ScenarioConfig config;
  LaneletMap map;
  PointCloud scan;
  std::vector<VehicleTrack> tracks;
  /// frames[i] belongs to config.sensors[i].
  std::vector<std::vector<PointCloud>> frames;
};

/// Deterministic in cfg (including cfg.seed).
Dataset run_scenario(const ScenarioConfig& cfg);

void save_dataset(const std::filesystem::path& dir, const Dataset& data);
/// Reads everything save_dataset writes except the vehicle tracks. Missing
/// frame files are an error.
Dataset load_dataset(const std::filesystem::path& dir);

struct SensorPose {
  std::string sensor_id;
  Pose pose;
};

void save_poses(const std::filesystem::path& path, std::span<const SensorPose> poses);
std::vector<SensorPose> load_poses(const std::filesystem::path& path);

}  // namespace roadreg
