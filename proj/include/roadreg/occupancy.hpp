// Sub-lane occupancy: per-frame polygon assignment, multi-sensor fusion into
// fixed time windows, and rolling heat maps.
//
// Messages travel as JSON lines:
//
//   {"sensor_id":"radar_1","t_ns":1234500000,"polygon_ids":[17,18,240]}

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "roadreg/geometry.hpp"
#include "roadreg/lanelet_map.hpp"

namespace roadreg {

inline constexpr std::int64_t kDefaultWindowNs = 50'000'000;

struct OccupancyMessage {
  std::string sensor_id;
  /// Frame time on the sending sensor's clock.
  std::int64_t t_ns = 0;
  /// Ascending, unique.
  std::vector<std::int64_t> polygon_ids;

  bool operator==(const OccupancyMessage&) const = default;
};

struct OccupancyWindow {
  std::int64_t window_index = 0;
  /// Ascending, unique.
  std::vector<std::int64_t> occupied;
  /// Ascending, unique.
  std::vector<std::string> contributing_sensors;
  std::int32_t message_count = 0;

  bool operator==(const OccupancyWindow&) const = default;
};

/// Point filters applied before assignment. Unset members disable a filter.
struct AssignFilters {
  /// Keep |radial_velocity| > v_min.
  std::optional<double> v_min;
  /// Keep z in [z_min, z_max] (map frame).
  std::optional<double> z_min;
  std::optional<double> z_max;
  /// Keep rcs >= rcs_min; points without rcs pass.
  std::optional<double> rcs_min;
};

/// Union of the polygons hit by the frame's (x, y) footprints. The frame must
/// already be in the map frame; the message carries frame.stamp_ns.
OccupancyMessage assign_frame(const PointCloud& frame, const PolygonMap& map,
                              const AssignFilters& filters, const std::string& sensor_id);

/// floor(t_ns / window_ns); a timestamp on a boundary opens the later window.
/// Throws ConfigError when window_ns <= 0.
std::int64_t window_of(std::int64_t t_ns, std::int64_t window_ns = kDefaultWindowNs);

/// Streaming window aggregator. Windows are emitted in index order, gaps as
/// empty windows. Window w is finalized once a message for window
/// w + lag + 1 or later has arrived; messages for finalized windows are
/// counted as late and dropped.
class WindowAggregator {
 public:
  explicit WindowAggregator(std::int64_t window_ns = kDefaultWindowNs,
                            std::int32_t lag_windows = 5);

  /// Adds one message; returns the windows it finalized.
  std::vector<OccupancyWindow> push(const OccupancyMessage& message);
  /// Finalizes every open window.
  std::vector<OccupancyWindow> flush();

  std::int64_t late_messages() const { return late_; }
  std::int64_t window_ns() const { return window_ns_; }

 private:
  struct Open {
    std::vector<std::int64_t> occupied;
    std::vector<std::string> sensors;
    std::int32_t messages = 0;
  };

  std::vector<OccupancyWindow> finalize_through(std::int64_t last);

  std::int64_t window_ns_;
  std::int32_t lag_;
  std::map<std::int64_t, Open> open_;
  std::optional<std::int64_t> next_emit_;
  std::optional<std::int64_t> newest_;
  std::int64_t late_ = 0;
};

struct FusionResult {
  std::vector<OccupancyWindow> windows;
  std::int64_t late_messages = 0;
};

/// Feeds the messages through a WindowAggregator in the given order and
/// flushes it.
FusionResult fuse_messages(std::span<const OccupancyMessage> messages,
                           std::int64_t window_ns = kDefaultWindowNs,
                           std::int32_t lag_windows = 5);

struct HeatMap {
  /// Occupied-window count per polygon; polygons never occupied are absent.
  std::map<std::int64_t, std::int64_t> counts;
  std::int64_t horizon_windows = 1;
  std::int64_t max_count = 0;

  std::int64_t count(std::int64_t polygon_id) const;
  bool operator==(const HeatMap&) const = default;
};

/// Rolling per-polygon count over the most recent `horizon` window indices.
class RollingHeatMap {
 public:
  explicit RollingHeatMap(std::int64_t horizon_windows);

  /// Windows must arrive with increasing indices.
  void add(const OccupancyWindow& window);
  HeatMap snapshot() const;

 private:
  std::int64_t horizon_;
  std::deque<std::pair<std::int64_t, std::vector<std::int64_t>>> history_;
  std::unordered_map<std::int64_t, std::int64_t> counts_;
};

/// Heat map over the last `horizon_windows` window indices of the sequence
/// (ending at the newest window). Throws ConfigError when the horizon is < 1.
HeatMap accumulate(std::span<const OccupancyWindow> windows, std::int64_t horizon_windows);

/// 64-bit FNV-1a digest of the counts and horizon.
std::uint64_t digest(const HeatMap& heat);

/// Sensor clock model:
///   t_sensor = t_true + offset + drift * (t_true - reference) + jitter
/// with jitter uniform in [-jitter_ns, jitter_ns], drawn from a hash of
/// (seed, sensor_id, t_true) so the same inputs always give the same stamp.
struct ClockModel {
  std::int64_t offset_ns = 0;
  /// Dimensionless rate error (1e-4 = 100 ppm).
  double drift = 0.0;
  std::int64_t jitter_ns = 0;
  std::int64_t reference_ns = 0;
  std::uint64_t seed = 0;

  bool operator==(const ClockModel&) const = default;
};

std::int64_t skewed_clock(const std::string& sensor_id, std::int64_t true_time_ns,
                          const ClockModel& clock);

void write_message(std::ostream& out, const OccupancyMessage& message);
void write_messages(std::ostream& out, std::span<const OccupancyMessage> messages);
/// Throws PipelineError naming the line on malformed input.
std::vector<OccupancyMessage> read_messages(std::istream& in);
void save_messages(const std::filesystem::path& path, std::span<const OccupancyMessage> messages);
std::vector<OccupancyMessage> load_messages(const std::filesystem::path& path);

}  // namespace roadreg
