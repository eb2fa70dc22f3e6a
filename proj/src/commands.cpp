#include "roadreg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <thread>

#include "roadreg/cloud_io.hpp"
#include "roadreg/error.hpp"
#include "roadreg/kdtree.hpp"
#include "roadreg/lanelet_map.hpp"
#include "roadreg/localization_filter.hpp"
#include "roadreg/preprocess.hpp"
#include "roadreg/registration.hpp"
#include "roadreg/render.hpp"
#include "roadreg/simulator.hpp"

namespace roadreg {

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw PipelineError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write " + path.string());
  return out;
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c == '\n' ? ' ' : c;
  }
  return quoted + "\"";
}

Dataset load(const std::filesystem::path& dir) {
  try {
    return load_dataset(dir);
  } catch (const PipelineError& e) {
    throw PipelineError(std::string("dataset: ") + e.what());
  }
}

PolygonMap polygons_of(const Dataset& data) {
  return build_polygon_map(data.map.lanelets, data.config.polygon_step);
}

std::vector<Eigen::Vector3d> target_points(const Dataset& data, const RunConfig& cfg) {
  try {
    return positions_of(build_target_cloud(data.scan, polygons_of(data), cfg.preprocess.target));
  } catch (const PipelineError& e) {
    throw PipelineError(std::string("target cloud: ") + e.what());
  }
}

void write_track(std::ostream& out, const std::vector<SensorTrackRow>& track) {
  out << "cycle,t_s,x,y,z,qx,qy,qz,qw,fitness,rmse,frames,measured,iterations,coast_reason\n";
  for (const auto& r : track) {
    const Eigen::Quaterniond q = canonical(r.pose.rotation);
    out << r.cycle << ',' << format_double(r.t_s) << ',' << format_double(r.pose.translation.x())
        << ',' << format_double(r.pose.translation.y()) << ','
        << format_double(r.pose.translation.z()) << ',' << format_double(q.x()) << ','
        << format_double(q.y()) << ',' << format_double(q.z()) << ',' << format_double(q.w())
        << ',' << format_double(r.fitness) << ',' << format_double(r.rmse) << ',' << r.frames
        << ',' << (r.measured ? 1 : 0) << ',' << r.iterations << ',' << csv_text(r.coast_reason)
        << '\n';
  }
}

}  // namespace

SimulateSummary cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out,
                             std::ostream& log) {
  const ScenarioConfig scenario = cfg.resolved_scenario();
  const Dataset data = run_scenario(scenario);
  ensure_dir(out);
  save_dataset(out, data);
  {
    auto f = open_out(out / "config.json");
    f << to_json(cfg).dump(2) << '\n';
  }

  SimulateSummary s;
  s.lanelets = data.map.lanelets.size();
  s.routes = lanelet_routes(data.map).size();
  s.tracks = data.tracks.size();
  s.scan_points = data.scan.size();
  log << "scenario " << scenario.name << ", seed " << scenario.seed << ", "
      << format_double(scenario.duration_s) << " s\n"
      << "map: " << s.lanelets << " lanelets, " << s.routes << " routes\n"
      << "traffic: " << s.tracks << " vehicles\n"
      << "scan: " << s.scan_points << " points\n";
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    std::size_t n = 0;
    for (const auto& f : data.frames[i]) n += f.size();
    s.frames.push_back(data.frames[i].size());
    s.detections.push_back(n);
    log << scenario.sensors[i].id << ": " << data.frames[i].size() << " frames, " << n
        << " detections\n";
  }
  log << "wrote " << out.string() << '\n';
  return s;
}

std::vector<SensorLocalization> cmd_localize(const RunConfig& cfg,
                                             const std::filesystem::path& dataset,
                                             const std::filesystem::path& out, std::ostream& log) {
  const Dataset data = load(dataset);
  const auto target = target_points(data, cfg);
  const KdTree tree(target);
  log << "target: " << target.size() << " points\n";

  std::vector<SensorLocalization> results;
  std::vector<SensorPose> poses;
  for (std::size_t si = 0; si < data.config.sensors.size(); ++si) {
    const SensorConfig& sensor = data.config.sensors[si];
    const std::vector<PointCloud>& frames = data.frames[si];
    const CycleConfig cycle = cfg.cycle_config(sensor.spec.frame_rate);
    const std::int32_t per_cycle = cycle.frames_per_cycle();

    Pose init;
    try {
      init = coarse_init(sensor.position_hint, sensor.heading_hint, sensor.height_hint);
    } catch (const ConfigError& e) {
      throw ConfigError("localize: " + sensor.id + ": " + e.what());
    }
    FilterState state = make_filter_state(init, cfg.filter.noise);

    SensorLocalization loc;
    loc.sensor_id = sensor.id;
    std::string last_reason = "no frames";
    const auto total = static_cast<std::int32_t>(frames.size());
    for (std::int32_t end = std::min(per_cycle, total), c = 1; end > 0;
         end = end == total ? 0 : std::min(end + per_cycle, total), ++c) {
      const std::span<const PointCloud> received(frames.data(), static_cast<std::size_t>(end));
      const CycleOutcome outcome = run_localization_cycle(
          received, tree, state, cycle, cfg.preprocess.source, cfg.registration);
      state = outcome.state;

      SensorTrackRow row;
      row.cycle = c;
      row.t_s = end / sensor.spec.frame_rate;
      row.frames = std::min(end, cfg.preprocess.source.window_frames);
      row.measured = outcome.measured();
      row.pose = state.pose();
      if (outcome.icp) {
        row.fitness = outcome.icp->fitness;
        row.rmse = outcome.icp->inlier_rmse;
        row.iterations = outcome.icp->iterations;
      }
      row.coast_reason = outcome.coast_reason;
      if (!row.measured) last_reason = outcome.coast_reason;
      loc.track.push_back(row);
    }
    const bool any = std::any_of(loc.track.begin(), loc.track.end(),
                                 [](const SensorTrackRow& r) { return r.measured; });
    if (!any) {
      throw PipelineError("localize: " + sensor.id + ": no cycle produced a measurement (" +
                          last_reason + ")");
    }
    loc.final_pose = state.pose();
    loc.error = pose_error(loc.final_pose, sensor.pose);
    poses.push_back({sensor.id, loc.final_pose});

    const auto measured = std::count_if(loc.track.begin(), loc.track.end(),
                                        [](const SensorTrackRow& r) { return r.measured; });
    const Eigen::Vector3d rpy = rpy_of(loc.final_pose.rotation_matrix());
    log << sensor.id << ": " << loc.track.size() << " cycles, " << measured << " measured\n"
        << "  pose x=" << format_double(loc.final_pose.translation.x())
        << " y=" << format_double(loc.final_pose.translation.y())
        << " z=" << format_double(loc.final_pose.translation.z())
        << " yaw=" << format_double(rad2deg(rpy.z())) << " deg\n"
        << "  error d2d=" << format_double(loc.error.d2d) << " m dz=" << format_double(loc.error.dz)
        << " m yaw=" << format_double(loc.error.yaw) << " deg\n";
    results.push_back(std::move(loc));
  }

  ensure_dir(out);
  for (const auto& loc : results) {
    auto f = open_out(out / ("track_" + loc.sensor_id + ".csv"));
    write_track(f, loc.track);
  }
  save_poses(out / "poses.csv", poses);
  log << "wrote " << out.string() << '\n';
  return results;
}

SweepReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& dataset,
                         const std::filesystem::path& out, std::ostream& log) {
  const Dataset data = load(dataset);
  const auto target = target_points(data, cfg);
  const KdTree tree(target);

  std::vector<SweepCase> cases;
  for (std::size_t si = 0; si < data.config.sensors.size(); ++si) {
    const SensorConfig& sensor = data.config.sensors[si];
    SweepCase c;
    c.sensor_id = sensor.id;
    try {
      c.source = positions_of(build_source_cloud(data.frames[si], cfg.preprocess.source));
    } catch (const PipelineError& e) {
      throw PipelineError("evaluate: " + sensor.id + ": " + e.what());
    }
    c.truth = sensor.pose;
    try {
      c.heading_hint = parse_compass(sensor.heading_hint);
    } catch (const ConfigError& e) {
      throw ConfigError("evaluate: " + sensor.id + ": " + e.what());
    }
    c.height_hint = sensor.height_hint;
    log << sensor.id << ": source " << c.source.size() << " points\n";
    cases.push_back(std::move(c));
  }

  const SweepReport report = run_seed_sweep(cases, tree, cfg.sweep_params(), cfg.registration);
  for (const auto& s : report.summaries) {
    log << s.sensor_id << ": " << s.runs << " runs, " << s.failures << " failed, mean d2d "
        << format_double(s.mean_d2d) << " m, |dz| " << format_double(s.mean_abs_dz)
        << " m, |yaw| " << format_double(s.mean_abs_yaw) << " deg, spread "
        << format_double(s.spread) << " m\n";
  }

  ensure_dir(out);
  {
    auto f = open_out(out / "errors.csv");
    write_error_table(f, report);
  }
  {
    auto f = open_out(out / "scatter.csv");
    write_scatter(f, report);
  }
  log << "wrote " << out.string() << '\n';
  return report;
}

HeatmapSummary cmd_heatmap(const RunConfig& cfg, const std::filesystem::path& dataset,
                           const std::filesystem::path& poses_path,
                           const std::filesystem::path& out, bool realtime, std::ostream& log) {
  const Dataset data = load(dataset);
  const std::vector<SensorPose> poses = load_poses(poses_path);
  const PolygonMap polygons = polygons_of(data);

  std::vector<OccupancyMessage> messages;
  for (std::size_t si = 0; si < data.config.sensors.size(); ++si) {
    const std::string& id = data.config.sensors[si].id;
    const auto it = std::find_if(poses.begin(), poses.end(),
                                 [&](const SensorPose& p) { return p.sensor_id == id; });
    if (it == poses.end()) {
      throw PipelineError("heatmap: no pose for sensor " + id + " in " + poses_path.string());
    }
    for (const auto& frame : data.frames[si]) {
      messages.push_back(
          assign_frame(transform_cloud(it->pose, frame), polygons, cfg.occupancy.filters, id));
    }
  }
  std::stable_sort(messages.begin(), messages.end(), [](const auto& a, const auto& b) {
    return a.t_ns != b.t_ns ? a.t_ns < b.t_ns : a.sensor_id < b.sensor_id;
  });

  const std::int64_t window_ns = cfg.occupancy.window_ms * 1'000'000;
  WindowAggregator aggregator(window_ns, cfg.occupancy.finalization_lag);
  RollingHeatMap rolling(cfg.occupancy.horizon_windows);
  std::vector<OccupancyWindow> windows;
  const auto consume = [&](std::vector<OccupancyWindow> done) {
    for (auto& w : done) {
      rolling.add(w);
      windows.push_back(std::move(w));
    }
  };
  const auto wall_start = std::chrono::steady_clock::now();
  for (const auto& m : messages) {
    if (realtime) {
      const auto offset = std::chrono::nanoseconds(m.t_ns - messages.front().t_ns);
      std::this_thread::sleep_until(wall_start + offset);
    }
    const std::size_t before = windows.size();
    consume(aggregator.push(m));
    if (realtime && windows.size() / 20 != before / 20) {
      const HeatMap snap = rolling.snapshot();
      log << "window " << windows.back().window_index << ": max count " << snap.max_count
          << '\n';
    }
  }
  consume(aggregator.flush());

  HeatmapSummary s;
  s.messages = messages.size();
  s.windows = windows.size();
  s.late_messages = aggregator.late_messages();
  s.heat = rolling.snapshot();
  s.instant = accumulate(windows, 1);

  ensure_dir(out);
  save_messages(out / "messages.jsonl", messages);
  RenderStyle style;
  style.map_width_px = cfg.occupancy.image_width_px;
  write_png(out / "heatmap.png", render_heatmap(polygons, s.heat, style).image);
  save_heatmap_csv(out / "heatmap.csv", polygons, s.heat);
  write_png(out / "heatmap_instant.png", render_heatmap(polygons, s.instant, style).image);
  save_heatmap_csv(out / "heatmap_instant.csv", polygons, s.instant);

  log << "messages: " << s.messages << ", windows: " << s.windows << ", late: "
      << s.late_messages << '\n'
      << "heat map: " << s.heat.counts.size() << " of " << polygons.polygons().size()
      << " polygons occupied, max count " << s.heat.max_count << " over "
      << s.heat.horizon_windows << " windows, digest " << std::hex << digest(s.heat) << std::dec
      << '\n'
      << "wrote " << out.string() << '\n';
  return s;
}

}  // namespace roadreg
