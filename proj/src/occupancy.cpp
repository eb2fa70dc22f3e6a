#include "roadreg/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "roadreg/error.hpp"

namespace roadreg {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void merge_into(std::vector<std::int64_t>& dst, std::span<const std::int64_t> src) {
  std::vector<std::int64_t> merged;
  merged.reserve(dst.size() + src.size());
  std::set_union(dst.begin(), dst.end(), src.begin(), src.end(), std::back_inserter(merged));
  dst = std::move(merged);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

OccupancyMessage assign_frame(const PointCloud& frame, const PolygonMap& map,
                              const AssignFilters& filters, const std::string& sensor_id) {
  std::vector<Eigen::Vector2d> footprints;
  footprints.reserve(frame.size());
  for (const auto& p : frame.points) {
    if (filters.v_min && !(std::abs(p.radial_velocity) > *filters.v_min)) continue;
    if (filters.z_min && p.position.z() < *filters.z_min) continue;
    if (filters.z_max && p.position.z() > *filters.z_max) continue;
    if (filters.rcs_min && p.rcs && *p.rcs < *filters.rcs_min) continue;
    footprints.push_back(p.position.head<2>());
  }

  OccupancyMessage message;
  message.sensor_id = sensor_id;
  message.t_ns = frame.stamp_ns;
  for (const auto& hits : query_points(map, footprints)) {
    message.polygon_ids.insert(message.polygon_ids.end(), hits.begin(), hits.end());
  }
  std::sort(message.polygon_ids.begin(), message.polygon_ids.end());
  message.polygon_ids.erase(std::unique(message.polygon_ids.begin(), message.polygon_ids.end()),
                            message.polygon_ids.end());
  return message;
}

std::int64_t window_of(std::int64_t t_ns, std::int64_t window_ns) {
  if (window_ns <= 0) throw ConfigError("occupancy: window length must be positive");
  return floor_div(t_ns, window_ns);
}

WindowAggregator::WindowAggregator(std::int64_t window_ns, std::int32_t lag_windows)
    : window_ns_(window_ns), lag_(lag_windows) {
  if (window_ns <= 0) throw ConfigError("occupancy: window length must be positive");
  if (lag_windows < 0) throw ConfigError("occupancy: finalization lag must be >= 0");
}

std::vector<OccupancyWindow> WindowAggregator::push(const OccupancyMessage& message) {
  const std::int64_t w = window_of(message.t_ns, window_ns_);
  if (next_emit_ && w < *next_emit_) {
    ++late_;
    return {};
  }
  Open& slot = open_[w];
  merge_into(slot.occupied, message.polygon_ids);
  const auto pos = std::lower_bound(slot.sensors.begin(), slot.sensors.end(), message.sensor_id);
  if (pos == slot.sensors.end() || *pos != message.sensor_id) {
    slot.sensors.insert(pos, message.sensor_id);
  }
  ++slot.messages;

  newest_ = newest_ ? std::max(*newest_, w) : w;
  return finalize_through(*newest_ - lag_ - 1);
}

std::vector<OccupancyWindow> WindowAggregator::flush() {
  if (!newest_) return {};
  return finalize_through(*newest_);
}

std::vector<OccupancyWindow> WindowAggregator::finalize_through(std::int64_t last) {
  std::vector<OccupancyWindow> out;
  if (!next_emit_) {
    if (open_.empty() || open_.begin()->first > last) return out;
    next_emit_ = open_.begin()->first;
  }
  for (std::int64_t w = *next_emit_; w <= last; ++w) {
    OccupancyWindow window;
    window.window_index = w;
    const auto it = open_.find(w);
    if (it != open_.end()) {
      window.occupied = std::move(it->second.occupied);
      window.contributing_sensors = std::move(it->second.sensors);
      window.message_count = it->second.messages;
      open_.erase(it);
    }
    out.push_back(std::move(window));
  }
  next_emit_ = std::max(*next_emit_, last + 1);
  return out;
}

FusionResult fuse_messages(std::span<const OccupancyMessage> messages, std::int64_t window_ns,
                           std::int32_t lag_windows) {
  WindowAggregator aggregator(window_ns, lag_windows);
  FusionResult result;
  for (const auto& m : messages) {
    auto done = aggregator.push(m);
    std::move(done.begin(), done.end(), std::back_inserter(result.windows));
  }
  auto rest = aggregator.flush();
  std::move(rest.begin(), rest.end(), std::back_inserter(result.windows));
  result.late_messages = aggregator.late_messages();
  return result;
}

std::int64_t HeatMap::count(std::int64_t polygon_id) const {
  const auto it = counts.find(polygon_id);
  return it == counts.end() ? 0 : it->second;
}

RollingHeatMap::RollingHeatMap(std::int64_t horizon_windows) : horizon_(horizon_windows) {
  if (horizon_windows < 1) throw ConfigError("occupancy: horizon must be >= 1 window");
}

void RollingHeatMap::add(const OccupancyWindow& window) {
  if (!history_.empty() && window.window_index <= history_.back().first) {
    throw PipelineError("occupancy: windows must arrive in increasing order");
  }
  history_.emplace_back(window.window_index, window.occupied);
  for (const auto id : window.occupied) ++counts_[id];
  const std::int64_t oldest_kept = window.window_index - horizon_ + 1;
  while (!history_.empty() && history_.front().first < oldest_kept) {
    for (const auto id : history_.front().second) {
      const auto it = counts_.find(id);
      if (--it->second == 0) counts_.erase(it);
    }
    history_.pop_front();
  }
}

HeatMap RollingHeatMap::snapshot() const {
  HeatMap heat;
  heat.horizon_windows = horizon_;
  for (const auto& [id, n] : counts_) {
    heat.counts.emplace(id, n);
    heat.max_count = std::max(heat.max_count, n);
  }
  return heat;
}

HeatMap accumulate(std::span<const OccupancyWindow> windows, std::int64_t horizon_windows) {
  RollingHeatMap rolling(horizon_windows);
  for (const auto& w : windows) rolling.add(w);
  return rolling.snapshot();
}

std::uint64_t digest(const HeatMap& heat) {
  std::uint64_t h = kFnvOffset;
  fnv_bytes(h, &heat.horizon_windows, sizeof heat.horizon_windows);
  for (const auto& [id, n] : heat.counts) {
    fnv_bytes(h, &id, sizeof id);
    fnv_bytes(h, &n, sizeof n);
  }
  return h;
}

std::int64_t skewed_clock(const std::string& sensor_id, std::int64_t true_time_ns,
                          const ClockModel& clock) {
  double jitter = 0.0;
  if (clock.jitter_ns > 0) {
    std::uint64_t h = kFnvOffset;
    fnv_bytes(h, sensor_id.data(), sensor_id.size());
    h = splitmix64(h ^ splitmix64(clock.seed) ^ splitmix64(static_cast<std::uint64_t>(true_time_ns)));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
    jitter = (2.0 * u - 1.0) * static_cast<double>(clock.jitter_ns);
  }
  const double drift = clock.drift * static_cast<double>(true_time_ns - clock.reference_ns);
  return true_time_ns + clock.offset_ns + static_cast<std::int64_t>(std::llround(drift + jitter));
}

void write_message(std::ostream& out, const OccupancyMessage& message) {
  const nlohmann::ordered_json j = {
      {"sensor_id", message.sensor_id},
      {"t_ns", message.t_ns},
      {"polygon_ids", message.polygon_ids},
  };
  out << j.dump() << '\n';
}

void write_messages(std::ostream& out, std::span<const OccupancyMessage> messages) {
  for (const auto& m : messages) write_message(out, m);
}

std::vector<OccupancyMessage> read_messages(std::istream& in) {
  std::vector<OccupancyMessage> messages;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      OccupancyMessage m;
      m.sensor_id = j.at("sensor_id").get<std::string>();
      m.t_ns = j.at("t_ns").get<std::int64_t>();
      m.polygon_ids = j.at("polygon_ids").get<std::vector<std::int64_t>>();
      if (!std::is_sorted(m.polygon_ids.begin(), m.polygon_ids.end()) ||
          std::adjacent_find(m.polygon_ids.begin(), m.polygon_ids.end()) != m.polygon_ids.end()) {
        throw PipelineError("polygon_ids must be ascending and unique");
      }
      messages.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw PipelineError("occupancy: message line " + std::to_string(line_no) + ": " + e.what());
    } catch (const PipelineError& e) {
      throw PipelineError("occupancy: message line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return messages;
}

void save_messages(const std::filesystem::path& path,
                   std::span<const OccupancyMessage> messages) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("occupancy: cannot write " + path.string());
  write_messages(out, messages);
}

std::vector<OccupancyMessage> load_messages(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("occupancy: cannot read " + path.string());
  return read_messages(in);
}

}  // namespace roadreg
