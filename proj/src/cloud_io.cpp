#include "roadreg/cloud_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "roadreg/error.hpp"

namespace roadreg {
namespace {

constexpr std::string_view kFrameIdTag = "frame_id:";
constexpr std::string_view kFrameTag = "frame:";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  field = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw PipelineError("cloud_io: bad number '" + std::string(field) + "' on line " +
                        std::to_string(line_no));
  }
  return value;
}

RadarPoint parse_point(std::string_view line, std::size_t line_no) {
  std::array<std::string_view, 6> fields;
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (count == fields.size()) {
      count = fields.size() + 1;
      break;
    }
    fields[count++] = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (count != 3 && count != 5 && count != 6) {
    throw PipelineError("cloud_io: expected 3, 5 or 6 fields on line " +
                        std::to_string(line_no));
  }
  RadarPoint p;
  p.position = {parse_number<double>(fields[0], line_no),
                parse_number<double>(fields[1], line_no),
                parse_number<double>(fields[2], line_no)};
  if (!p.position.allFinite()) {
    throw PipelineError("cloud_io: non-finite position on line " + std::to_string(line_no));
  }
  if (count >= 5) {
    p.radial_velocity = parse_number<double>(fields[3], line_no);
    p.timestamp_ns = parse_number<std::int64_t>(fields[4], line_no);
  }
  if (count == 6) p.rcs = parse_number<double>(fields[5], line_no);
  return p;
}

void write_point(std::ostream& out, const RadarPoint& p) {
  out << format_double(p.position.x()) << ',' << format_double(p.position.y()) << ','
      << format_double(p.position.z()) << ',' << format_double(p.radial_velocity) << ','
      << p.timestamp_ns;
  if (p.rcs) out << ',' << format_double(*p.rcs);
  out << '\n';
}

// Header payload after '#', or nullopt for data lines.
std::optional<std::string_view> header_of(std::string_view line) {
  line = trim(line);
  if (line.empty() || line.front() != '#') return std::nullopt;
  return trim(line.substr(1));
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

void write_cloud(std::ostream& out, const PointCloud& cloud) {
  out << "# frame_id: " << cloud.frame_id << '\n';
  out << "# stamp_ns: " << cloud.stamp_ns << '\n';
  out << "# fields: x,y,z,radial_velocity,timestamp_ns[,rcs]\n";
  for (const auto& p : cloud.points) write_point(out, p);
}

PointCloud read_cloud(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (const auto header = header_of(line)) {
      if (header->starts_with(kFrameIdTag)) {
        cloud.frame_id = std::string(trim(header->substr(kFrameIdTag.size())));
      } else if (header->starts_with("stamp_ns:")) {
        cloud.stamp_ns = parse_number<std::int64_t>(header->substr(9), line_no);
      }
      continue;
    }
    cloud.points.push_back(parse_point(line, line_no));
  }
  return cloud;
}

void write_frames(std::ostream& out, const std::vector<PointCloud>& frames) {
  out << "# frame_id: " << (frames.empty() ? std::string() : frames.front().frame_id) << '\n';
  out << "# frames: " << frames.size() << '\n';
  out << "# fields: x,y,z,radial_velocity,timestamp_ns[,rcs]\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out << "# frame: " << i << ',' << frames[i].stamp_ns << '\n';
    for (const auto& p : frames[i].points) write_point(out, p);
  }
}

std::vector<PointCloud> read_frames(std::istream& in) {
  std::vector<PointCloud> frames;
  std::string frame_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (const auto header = header_of(line)) {
      if (header->starts_with(kFrameIdTag)) {
        frame_id = std::string(trim(header->substr(kFrameIdTag.size())));
      } else if (header->starts_with(kFrameTag)) {
        const std::string_view payload = trim(header->substr(kFrameTag.size()));
        const std::size_t comma = payload.find(',');
        if (comma == std::string_view::npos) {
          throw PipelineError("cloud_io: malformed frame header on line " +
                              std::to_string(line_no));
        }
        PointCloud frame;
        frame.frame_id = frame_id;
        frame.stamp_ns = parse_number<std::int64_t>(payload.substr(comma + 1), line_no);
        frames.push_back(std::move(frame));
      }
      continue;
    }
    if (frames.empty()) {
      throw PipelineError("cloud_io: point before first frame header on line " +
                          std::to_string(line_no));
    }
    frames.back().points.push_back(parse_point(line, line_no));
  }
  return frames;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw PipelineError("cloud_io: cannot write " + path.string());
  write_cloud(out, cloud);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cloud_io: cannot open " + path.string());
  return read_cloud(in);
}

void save_frames(const std::filesystem::path& path, const std::vector<PointCloud>& frames) {
  std::ofstream out(path);
  if (!out) throw PipelineError("cloud_io: cannot write " + path.string());
  write_frames(out, frames);
}

std::vector<PointCloud> load_frames(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cloud_io: cannot open " + path.string());
  return read_frames(in);
}

}  // namespace roadreg
