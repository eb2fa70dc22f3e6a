// End-to-end checks on the bundled intersection scene at its default
// settings (100 s, 20 Hz, default noise).

#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include "roadreg/commands.hpp"
#include "roadreg/config.hpp"
#include "roadreg/evaluation.hpp"
#include "roadreg/preprocess.hpp"
#include "roadreg/registration.hpp"
#include "roadreg/simulator.hpp"

using namespace roadreg;

namespace {

constexpr double kDeg = M_PI / 180.0;

struct SceneData {
  RunConfig cfg;
  Dataset data;
  std::vector<Eigen::Vector3d> target;
  std::unique_ptr<KdTree> tree;
  std::vector<std::vector<Eigen::Vector3d>> sources;
};

class Scene : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scene_ = new SceneData;
    scene_->data = run_scenario(scene_->cfg.resolved_scenario());
    const PolygonMap polys = build_polygon_map(scene_->data.map.lanelets, scene_->data.config.polygon_step);
    scene_->target = positions_of(build_target_cloud(scene_->data.scan, polys, scene_->cfg.preprocess.target));
    scene_->tree = std::make_unique<KdTree>(scene_->target);
    for (const auto& frames : scene_->data.frames) {
      scene_->sources.push_back(positions_of(build_source_cloud(frames, scene_->cfg.preprocess.source)));
    }
  }
  static void TearDownTestSuite() {
    delete scene_;
    scene_ = nullptr;
  }

  static const SensorConfig& sensor(std::size_t i) { return scene_->data.config.sensors[i]; }

  static LocalizationError register_from(std::size_t i, const Pose& init) {
    const IcpResult r = multiscale_icp(scene_->sources[i], *scene_->tree, init, scene_->cfg.registration);
    return pose_error(r.transform, sensor(i).pose);
  }

  static SceneData* scene_;
};

SceneData* Scene::scene_ = nullptr;

}  // namespace

TEST_F(Scene, TenMetreFifteenDegreeOffsetsConverge) {
  for (std::size_t i = 0; i < scene_->sources.size(); ++i) {
    const Pose& truth = sensor(i).pose;
    const double yaw = rpy_of(truth.rotation_matrix())[2];
    for (int k = 0; k < 4; ++k) {
      const double dir = k * M_PI / 2 + M_PI / 4;
      const double dyaw = (k % 2 == 0 ? 15.0 : -15.0) * kDeg;
      const Pose init = Pose::from_xyz_rpy(
          truth.translation + Eigen::Vector3d(10 * std::cos(dir), 10 * std::sin(dir), 0.0), 0.0, 0.0,
          yaw + dyaw);
      const auto e = register_from(i, init);
      EXPECT_LT(e.d2d, 0.5) << sensor(i).id << " direction " << k;
      EXPECT_LT(std::abs(e.yaw), 0.5) << sensor(i).id << " direction " << k;
    }
  }
}

TEST_F(Scene, FortyFiveDegreeHintConverges) {
  for (std::size_t i = 0; i < scene_->sources.size(); ++i) {
    const Pose& truth = sensor(i).pose;
    const double yaw = rpy_of(truth.rotation_matrix())[2];
    for (const double off : {45.0, -45.0}) {
      const Pose init = Pose::from_xyz_rpy({truth.translation.x(), truth.translation.y(), sensor(i).height_hint},
                                           0.0, 0.0, yaw + off * kDeg);
      const auto e = register_from(i, init);
      EXPECT_LT(e.d2d, 0.5) << sensor(i).id << " " << off;
      EXPECT_LT(std::abs(e.yaw), 0.5) << sensor(i).id << " " << off;
    }
  }
}

TEST_F(Scene, FiftySeedsClusterTightly) {
  std::vector<SweepCase> cases;
  for (std::size_t i = 0; i < scene_->sources.size(); ++i) {
    SweepCase c;
    c.sensor_id = sensor(i).id;
    c.source = scene_->sources[i];
    c.truth = sensor(i).pose;
    c.heading_hint = parse_compass(sensor(i).heading_hint);
    c.height_hint = sensor(i).height_hint;
    cases.push_back(std::move(c));
  }
  const SweepReport r = run_seed_sweep(cases, *scene_->tree, scene_->cfg.sweep_params(),
                                       scene_->cfg.registration);
  for (const auto& s : r.summaries) {
    std::cout << s.sensor_id << ": mean d2d " << s.mean_d2d << " m, |yaw| " << s.mean_abs_yaw
              << " deg, spread " << s.spread << " m\n";
    EXPECT_EQ(s.runs, 50);
    EXPECT_LT(s.spread, 2.0 * s.mean_d2d) << s.sensor_id;
  }
}

TEST_F(Scene, LocalizeFinalErrorBelowHalfMetre) {
  const auto dir = std::filesystem::temp_directory_path() / "roadreg_test_scene";
  std::filesystem::remove_all(dir);
  save_dataset(dir, scene_->data);
  std::ostringstream log;
  const auto results = cmd_localize(scene_->cfg, dir, dir, log);
  std::cout << log.str();
  for (const auto& loc : results) EXPECT_LT(loc.error.d2d, 0.5) << loc.sensor_id;
  std::filesystem::remove_all(dir);
}
