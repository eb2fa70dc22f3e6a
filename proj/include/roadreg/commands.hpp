// CLI workflows. Each command reads and writes files in fixed layouts and
// prints a short report to `log`; identical config and inputs give
// byte-identical files.
//
//   simulate   <out>/  dataset files (see simulator.hpp) + config.json
//   localize   <out>/  track_<id>.csv per sensor, poses.csv
//   evaluate   <out>/  errors.csv, scatter.csv (see evaluation.hpp)
//   heatmap    <out>/  messages.jsonl, heatmap.png, heatmap.csv,
//                      heatmap_instant.png, heatmap_instant.csv
//
// Track columns:
//   cycle,t_s,x,y,z,qx,qy,qz,qw,fitness,rmse,frames,measured,iterations,coast_reason

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "roadreg/config.hpp"
#include "roadreg/evaluation.hpp"
#include "roadreg/geometry.hpp"
#include "roadreg/occupancy.hpp"

namespace roadreg {

struct SimulateSummary {
  std::size_t lanelets = 0;
  std::size_t routes = 0;
  std::size_t tracks = 0;
  std::size_t scan_points = 0;
  /// Per sensor, in config order.
  std::vector<std::size_t> frames;
  std::vector<std::size_t> detections;
};

SimulateSummary cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out,
                             std::ostream& log);

struct SensorTrackRow {
  std::int32_t cycle = 0;
  double t_s = 0.0;
  std::int32_t frames = 0;
  bool measured = false;
  Pose pose;
  double fitness = 0.0;
  double rmse = 0.0;
  std::int32_t iterations = 0;
  std::string coast_reason;
};

struct SensorLocalization {
  std::string sensor_id;
  std::vector<SensorTrackRow> track;
  Pose final_pose;
  LocalizationError error;
};

/// Runs the cycles of every sensor over all frames of the dataset, one cycle
/// per frames_per_cycle frames plus a final partial cycle. Throws
/// PipelineError when a sensor never gets a measurement.
std::vector<SensorLocalization> cmd_localize(const RunConfig& cfg,
                                             const std::filesystem::path& dataset,
                                             const std::filesystem::path& out, std::ostream& log);

/// Seed sweep on the trace cloud of the last window of every sensor.
SweepReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& dataset,
                         const std::filesystem::path& out, std::ostream& log);

struct HeatmapSummary {
  std::size_t messages = 0;
  std::size_t windows = 0;
  std::int64_t late_messages = 0;
  HeatMap heat;
  HeatMap instant;
};

/// Replays every sensor's frames in stamp order, transformed by its pose
/// from `poses`, through assignment, fusion and accumulation. With
/// `realtime` the replay is paced by the frame stamps. Throws PipelineError
/// when a sensor has no pose.
HeatmapSummary cmd_heatmap(const RunConfig& cfg, const std::filesystem::path& dataset,
                           const std::filesystem::path& poses, const std::filesystem::path& out,
                           bool realtime, std::ostream& log);

}  // namespace roadreg
