#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "roadreg/error.hpp"
#include "roadreg/simulator.hpp"

using namespace roadreg;

namespace {

Lanelet rect_lanelet(double x0, double y0, double length, double width, std::int64_t id) {
  Lanelet l;
  l.id = id;
  l.left = {{x0, y0 + width}, {x0 + length, y0 + width}};
  l.right = {{x0, y0}, {x0 + length, y0}};
  return l;
}

ScanParams road_only(double density, double noise) {
  ScanParams p;
  p.density = density;
  p.noise_sigma = noise;
  p.offroad_density = 0.0;
  p.output_decimals = -1;
  return p;
}

SensorConfig ideal_sensor() {
  SensorConfig s;
  s.id = "ideal";
  s.pose = Pose::from_xyz_rpy({0, 0, 5}, 0, 0, 0);
  s.spec.range_noise_sigma = 0.0;
  s.spec.angle_noise_sigma_deg = 0.0;
  s.spec.velocity_noise_sigma = 0.0;
  s.spec.output_decimals = -1;
  return s;
}

ClutterParams no_clutter() {
  ClutterParams c;
  c.static_fraction = 0.0;
  c.dynamic_fraction = 0.0;
  return c;
}

ScenarioConfig short_scene(double duration) {
  ScenarioConfig cfg = intersection_scenario();
  cfg.duration_s = duration;
  return cfg;
}

}  // namespace

TEST(GenerateScan, UnitSquareAtDensityHundred) {
  const PolygonMap map = build_polygon_map(std::vector<Lanelet>{rect_lanelet(3, 4, 1, 1, 1)}, 0.5);
  std::vector<std::int64_t> counts;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const PointCloud scan = generate_scan(map, road_only(100, 0.0), {}, rng);
    for (const auto& p : scan.points) {
      ASSERT_GE(p.position.x(), 3.0 - 1e-9);
      ASSERT_LE(p.position.x(), 4.0 + 1e-9);
      ASSERT_GE(p.position.y(), 4.0 - 1e-9);
      ASSERT_LE(p.position.y(), 5.0 + 1e-9);
      ASSERT_EQ(p.position.z(), 0.0);
    }
    counts.push_back(static_cast<std::int64_t>(scan.size()));
  }
  double mean = 0.0;
  for (auto c : counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(counts.size());
  // Poisson(100) averaged over 200 draws: standard error 0.71.
  EXPECT_NEAR(mean, 100.0, 3.0);
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), 100.0, 50.0);
}

TEST(GenerateScan, CountProportionalToArea) {
  const std::vector<Lanelet> ls = {rect_lanelet(0, 0, 40, 3.5, 1), rect_lanelet(0, 10, 60, 3.5, 2)};
  const PolygonMap map = build_polygon_map(ls, 0.5);
  std::mt19937_64 rng(1);
  ScanParams p = road_only(20, 0.02);
  p.road_height = 2.5;
  const PointCloud scan = generate_scan(map, p, {}, rng);
  const double area = 100 * 3.5;
  EXPECT_NEAR(static_cast<double>(scan.size()), 20 * area, 0.05 * 20 * area);
  double z_sum = 0.0;
  for (const auto& pt : scan.points) {
    ASSERT_TRUE(map.covers(pt.position.head<2>()));
    z_sum += pt.position.z();
  }
  EXPECT_NEAR(z_sum / static_cast<double>(scan.size()), 2.5, 0.005);
}

TEST(GenerateScan, OffRoadAndCanopies) {
  const PolygonMap map = build_polygon_map(std::vector<Lanelet>{rect_lanelet(0, 0, 20, 3, 1)}, 0.5);
  std::mt19937_64 rng(2);
  ScanParams p = road_only(10, 0.0);
  p.offroad_density = 1.0;
  p.offroad_margin = 10.0;
  p.canopy_points = 300;
  const std::vector<Canopy> canopies = {{{10, 12, 6}, 2.0}};
  const PointCloud scan = generate_scan(map, p, canopies, rng);
  std::size_t offroad = 0;
  std::size_t canopy = 0;
  for (const auto& pt : scan.points) {
    if (pt.position.z() > 1.0) {
      ASSERT_LE((pt.position - Eigen::Vector3d(10, 12, 6)).norm(), 2.0 + 1e-9);
      ++canopy;
    } else if (!map.covers(pt.position.head<2>())) {
      ++offroad;
    }
  }
  EXPECT_NEAR(static_cast<double>(offroad), 40.0 * 23.0 - 60.0, 4 * std::sqrt(860.0));
  EXPECT_NEAR(static_cast<double>(canopy), 300.0, 4 * std::sqrt(300.0));
  std::mt19937_64 again(2);
  EXPECT_THROW(generate_scan(map, road_only(0, 0), {}, again), ConfigError);
}

TEST(Traffic, TrackDurationArithmetic) {
  const std::vector<Eigen::Vector2d> path = {{0, 0}, {60, 0}, {60, 40}};
  const VehicleTrack t = make_track(3, path, 2.0, 10.0);
  EXPECT_DOUBLE_EQ(t.start_time(), 2.0);
  EXPECT_DOUBLE_EQ(t.end_time() - t.start_time(), 10.0);
  const auto mid = t.state_at(5.0);
  ASSERT_TRUE(mid.has_value());
  EXPECT_NEAR(mid->position.x(), 30.0, 1e-12);
  EXPECT_NEAR(mid->velocity.x(), 10.0, 1e-12);
  EXPECT_NEAR(t.state_at(9.0)->heading, M_PI / 2, 1e-12);
  EXPECT_FALSE(t.state_at(1.9).has_value());
  EXPECT_FALSE(t.state_at(12.0).has_value());
  for (std::size_t i = 1; i < t.waypoints.size(); ++i) {
    EXPECT_GT(t.waypoints[i].t, t.waypoints[i - 1].t);
  }
  EXPECT_THROW(make_track(0, std::vector<Eigen::Vector2d>{{0, 0}}, 0, 1), ConfigError);
}

TEST(Traffic, ZeroRateAndNoRoutes) {
  const LaneletMap map = intersection_map(IntersectionParams{});
  TrafficParams p;
  p.arrival_rate = 0.0;
  std::mt19937_64 rng(3);
  EXPECT_TRUE(simulate_traffic(map, p, 100, rng).empty());
  LaneletMap junction_only;
  Lanelet j = rect_lanelet(0, 0, 10, 3, 1);
  j.kind = LaneletKind::junction;
  junction_only.lanelets = {j};
  EXPECT_THROW(simulate_traffic(junction_only, TrafficParams{}, 10, rng), PipelineError);
}

TEST(Traffic, TracksStayInLaneAndCoverRoutes) {
  const LaneletMap map = intersection_map(IntersectionParams{});
  const PolygonMap polys = build_polygon_map(map.lanelets, 0.5);
  TrafficParams p;
  std::mt19937_64 rng(4);
  const auto tracks = simulate_traffic(map, p, 600, rng);
  ASSERT_FALSE(tracks.empty());
  std::set<std::int64_t> visited;
  std::set<std::int64_t> routes;
  for (const auto& t : tracks) {
    routes.insert(t.route);
    for (const auto& w : t.waypoints) ASSERT_GE(w.speed, 0.0);
    for (double s = std::max(0.0, t.start_time()); s < t.end_time(); s += 0.02) {
      const auto state = t.state_at(s);
      const auto ids = polys.query_point(state->position);
      if (ids.empty()) {
        // Route ends are cut square to the lane, the offset path is not.
        const Eigen::Vector2d nudge = 0.05 * state->velocity.normalized();
        ASSERT_TRUE(polys.covers(state->position + nudge) || polys.covers(state->position - nudge))
            << "track " << t.id << " off the road at t=" << s;
      }
      visited.insert(ids.begin(), ids.end());
    }
  }
  EXPECT_EQ(routes.size(), lanelet_routes(map).size());
  EXPECT_GE(static_cast<double>(visited.size()), 0.99 * static_cast<double>(polys.polygons().size()));
}

TEST(RadarFrame, ZeroNoiseDopplerAndFootprint) {
  const SensorConfig sensor = ideal_sensor();
  const ClutterParams clutter = no_clutter();
  std::vector<VehicleTrack> tracks;
  tracks.push_back(make_track(0, std::vector<Eigen::Vector2d>{{40, 0}, {400, 0}}, 0, 10));
  tracks.push_back(make_track(1, std::vector<Eigen::Vector2d>{{60, -100}, {60, 100}}, 0, 10));
  tracks.push_back(make_track(2, std::vector<Eigen::Vector2d>{{80, 60}, {20, 150}}, 0, 7));
  const FrameContext ctx{&sensor, tracks, &clutter, {}};
  std::mt19937_64 rng(5);
  const Eigen::Matrix3d r = sensor.pose.rotation_matrix();
  std::size_t checked = 0;
  for (double t = 0.0; t < 5.0; t += 0.05) {
    const PointCloud frame = simulate_radar_frame(ctx, t, 7, rng);
    EXPECT_EQ(frame.stamp_ns, 7);
    for (const auto& p : frame.points) {
      const Eigen::Vector3d world = r * p.position + sensor.pose.translation;
      bool on_some_vehicle = false;
      for (const auto& track : tracks) {
        const auto s = track.state_at(t);
        if (!s) continue;
        const Eigen::Vector2d d = world.head<2>() - s->position;
        const Eigen::Vector2d f(std::cos(s->heading), std::sin(s->heading));
        const double along = d.dot(f);
        const double across = d.x() * -f.y() + d.y() * f.x();
        if (std::abs(along) <= track.length / 2 + 1e-9 && std::abs(across) <= track.width / 2 + 1e-9 &&
            world.z() >= -1e-9 && world.z() <= track.height + 1e-9) {
          on_some_vehicle = true;
          const Eigen::Vector3d v(s->velocity.x(), s->velocity.y(), 0.0);
          EXPECT_NEAR(p.radial_velocity, v.dot((r * p.position).normalized()), 1e-9);
        }
      }
      ASSERT_TRUE(on_some_vehicle);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500u);
}

TEST(RadarFrame, DynamicClutterStaysInCanopies) {
  const SensorConfig sensor = ideal_sensor();
  ClutterParams clutter = no_clutter();
  clutter.dynamic_fraction = 0.3;
  const std::vector<Canopy> canopies = {{{50, 10, 6}, 2.5}, {{70, -15, 6}, 2.0}, {{-50, 0, 6}, 2.0}};
  std::vector<VehicleTrack> tracks;
  tracks.push_back(make_track(0, std::vector<Eigen::Vector2d>{{40, 0}, {400, 0}}, 0, 10));
  const FrameContext ctx{&sensor, tracks, &clutter, canopies};
  std::mt19937_64 rng(6);
  const Eigen::Matrix3d r = sensor.pose.rotation_matrix();
  std::size_t in_canopy = 0;
  std::size_t total = 0;
  for (double t = 0.0; t < 5.0; t += 0.05) {
    for (const auto& p : simulate_radar_frame(ctx, t, 0, rng).points) {
      const Eigen::Vector3d world = r * p.position + sensor.pose.translation;
      ++total;
      if ((world - canopies[0].center).norm() <= canopies[0].radius + 1e-9 ||
          (world - canopies[1].center).norm() <= canopies[1].radius + 1e-9) {
        ++in_canopy;
        EXPECT_LE(std::abs(p.radial_velocity), clutter.canopy_speed + 1e-12);
      } else {
        const auto s = tracks[0].state_at(t);
        ASSERT_TRUE(s);
        EXPECT_LE(std::abs(world.x() - s->position.x()), tracks[0].length / 2 + 1e-9);
      }
    }
  }
  // Clutter is 30% of the non-static detections.
  EXPECT_NEAR(static_cast<double>(in_canopy) / total, 0.3, 0.03);
}

TEST(RadarFrame, RadialVelocitySignsAndFov) {
  const SensorConfig sensor = ideal_sensor();
  const ClutterParams clutter = no_clutter();
  std::mt19937_64 rng(6);
  // Receding straight ahead, far enough that the line of sight is nearly axial.
  std::vector<VehicleTrack> away = {make_track(0, std::vector<Eigen::Vector2d>{{250, 0}, {400, 0}}, 0, 10)};
  const PointCloud a = simulate_radar_frame({&sensor, away, &clutter, {}}, 1.0, 0, rng);
  ASSERT_FALSE(a.empty());
  for (const auto& p : a.points) EXPECT_NEAR(p.radial_velocity, 10.0, 0.01);
  // Crossing in front at the closest point.
  std::vector<VehicleTrack> across = {make_track(0, std::vector<Eigen::Vector2d>{{200, -50}, {200, 50}}, 0, 10)};
  const PointCloud c = simulate_radar_frame({&sensor, across, &clutter, {}}, 5.0, 0, rng);
  ASSERT_FALSE(c.empty());
  for (const auto& p : c.points) EXPECT_NEAR(p.radial_velocity, 0.0, 0.1);
  // Behind the sensor and outside the 120 deg fan.
  std::vector<VehicleTrack> behind = {make_track(0, std::vector<Eigen::Vector2d>{{-50, 0}, {-50, 100}}, 0, 1),
                                      make_track(1, std::vector<Eigen::Vector2d>{{10, 40}, {10, 100}}, 0, 1)};
  for (int k = 0; k < 50; ++k) {
    EXPECT_TRUE(simulate_radar_frame({&sensor, behind, &clutter, {}}, 1.0, 0, rng).empty());
  }
}

TEST(RunScenario, FrameCountsAndStaticShare) {
  const ScenarioConfig cfg = short_scene(10.0);
  const Dataset d = run_scenario(cfg);
  ASSERT_EQ(d.frames.size(), 2u);
  std::size_t below = 0;
  std::size_t total = 0;
  for (std::size_t s = 0; s < d.frames.size(); ++s) {
    EXPECT_EQ(d.frames[s].size(), 200u);
    for (std::size_t k = 0; k < d.frames[s].size(); ++k) {
      const auto& f = d.frames[s][k];
      EXPECT_EQ(f.frame_id, cfg.sensors[s].id);
      EXPECT_EQ(f.stamp_ns, skewed_clock(cfg.sensors[s].id, static_cast<std::int64_t>(k) * 50'000'000,
                                         [&] {
                                           ClockModel c = cfg.sensors[s].clock;
                                           c.seed = cfg.seed;
                                           return c;
                                         }()));
      for (const auto& p : f.points) {
        below += std::abs(p.radial_velocity) <= cfg.clutter.static_speed_limit ? 1 : 0;
        ++total;
      }
    }
  }
  const double share = static_cast<double>(below) / static_cast<double>(total);
  EXPECT_NEAR(share, *cfg.clutter.static_fraction, 0.01);
}

TEST(RunScenario, DeterministicUnderSeed) {
  const ScenarioConfig cfg = short_scene(3.0);
  const Dataset a = run_scenario(cfg);
  const Dataset b = run_scenario(cfg);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.scan, b.scan);
  ScenarioConfig other = cfg;
  other.seed = cfg.seed + 1;
  const Dataset c = run_scenario(other);
  EXPECT_NE(a.frames, c.frames);
  EXPECT_NE(a.scan, c.scan);
}

TEST(RunScenario, SaveLoadRoundTrip) {
  const Dataset d = run_scenario(short_scene(2.0));
  const auto dir = std::filesystem::temp_directory_path() / "roadreg_test_dataset";
  std::filesystem::remove_all(dir);
  save_dataset(dir, d);
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.config.seed, d.config.seed);
  EXPECT_EQ(back.config.duration_s, d.config.duration_s);
  ASSERT_EQ(back.config.sensors.size(), d.config.sensors.size());
  for (std::size_t s = 0; s < d.config.sensors.size(); ++s) {
    EXPECT_EQ(back.config.sensors[s].id, d.config.sensors[s].id);
    EXPECT_LT((back.config.sensors[s].pose.translation - d.config.sensors[s].pose.translation).norm(), 1e-9);
    EXPECT_EQ(back.config.sensors[s].clock, d.config.sensors[s].clock);
  }
  EXPECT_EQ(back.frames, d.frames);
  EXPECT_EQ(back.scan, d.scan);
  EXPECT_EQ(back.map.lanelets.size(), d.map.lanelets.size());

  const auto truth = load_poses(dir / "truth.csv");
  ASSERT_EQ(truth.size(), 2u);
  EXPECT_EQ(truth[1].sensor_id, "radar_2");
  EXPECT_LT((truth[1].pose.translation - d.config.sensors[1].pose.translation).norm(), 1e-9);

  std::filesystem::remove(dir / "frames_radar_2.csv");
  EXPECT_THROW(load_dataset(dir), PipelineError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_dataset(dir), PipelineError);
}

TEST(ScenarioValidation, RejectsBadValues) {
  EXPECT_NO_THROW(validate(intersection_scenario()));
  ScenarioConfig cfg = intersection_scenario();
  cfg.traffic.arrival_rate = -1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = intersection_scenario();
  cfg.sensors[1].id = cfg.sensors[0].id;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = intersection_scenario();
  cfg.sensors[0].clock.jitter_ns = 25'000'000;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = intersection_scenario();
  cfg.clutter.static_fraction = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = intersection_scenario();
  cfg.sensors[0].spec.azimuth_fov_deg = 400;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = intersection_scenario();
  cfg.sensors.clear();
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = intersection_scenario();
  cfg.scan.density = 0.0;
  EXPECT_THROW(run_scenario(cfg), ConfigError);
}

TEST(ScenarioJson, RoundTripAndStrictKeys) {
  const ScenarioConfig cfg = intersection_scenario();
  const auto j = to_json(cfg);
  const ScenarioConfig back = scenario_from_json(nlohmann::json::parse(j.dump()), ScenarioConfig{});
  // Angles pass through a rotation matrix, so compare numbers with a tolerance.
  const auto flat_a = nlohmann::json(j).flatten();
  const auto flat_b = nlohmann::json(to_json(back)).flatten();
  ASSERT_EQ(flat_a.size(), flat_b.size());
  for (const auto& [key, value] : flat_a.items()) {
    ASSERT_TRUE(flat_b.contains(key)) << key;
    if (value.is_number_float()) {
      EXPECT_NEAR(value.get<double>(), flat_b[key].get<double>(), 1e-9) << key;
    } else {
      EXPECT_EQ(value, flat_b[key]) << key;
    }
  }
  nlohmann::json bad = nlohmann::json::parse(j.dump());
  bad["traffic"]["arrival_rat"] = 0.1;
  EXPECT_THROW(scenario_from_json(bad, cfg), ConfigError);
}
