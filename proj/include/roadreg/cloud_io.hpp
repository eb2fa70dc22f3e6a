// Plain-text point-cloud files.
//
// One point per line, comma separated:
//
//   x,y,z,radial_velocity,timestamp_ns[,rcs]
//
// Lines starting with '#' are headers. "# frame_id: <label>" names the
// coordinate frame. Frame sequences add "# frame: <index>,<stamp_ns>" before
// the points of each frame; a plain reader that ignores unknown headers sees
// one concatenated cloud. Doubles are written in shortest round-trip form so
// reading a written file reproduces every bit. Rows with only x,y,z are
// accepted on input (laser-scan points).

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "roadreg/geometry.hpp"

namespace roadreg {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

void write_cloud(std::ostream& out, const PointCloud& cloud);
PointCloud read_cloud(std::istream& in);

void write_frames(std::ostream& out, const std::vector<PointCloud>& frames);
std::vector<PointCloud> read_frames(std::istream& in);

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_cloud(const std::filesystem::path& path);
void save_frames(const std::filesystem::path& path, const std::vector<PointCloud>& frames);
std::vector<PointCloud> load_frames(const std::filesystem::path& path);

}  // namespace roadreg
