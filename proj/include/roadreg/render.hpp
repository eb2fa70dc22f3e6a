// Heat-map output: an RGB raster of the polygon map shaded by occupancy, with
// a colour scale labelled by the maximum count, and a CSV export.
//
// CSV layout:
//
//   horizon_windows,max_count
//   2000,225
//   polygon_id,count
//   0,0
//   1,17
//   ...

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "roadreg/lanelet_map.hpp"
#include "roadreg/occupancy.hpp"

namespace roadreg {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  /// Row-major RGB, top row first.
  std::vector<std::uint8_t> pixels;

  Rgb at(int x, int y) const;
  void set(int x, int y, const Rgb& c);
};

struct RenderStyle {
  /// Width of the map area in pixels; the height follows the map's aspect.
  int map_width_px = 1200;
  int margin_px = 16;
  int legend_width_px = 90;
  Rgb background = {255, 255, 255};
};

/// Light-to-dark colour ramp. Every channel is non-increasing in `count`;
/// count 0 gives the lightest colour, count >= max_count the darkest.
Rgb heat_color(std::int64_t count, std::int64_t max_count);

/// Relative luminance in [0, 255]; strictly decreasing along the ramp.
double luminance(const Rgb& c);

/// Maps map-frame coordinates to the pixel grid of a rendered image.
struct RasterFrame {
  Eigen::Vector2d min = Eigen::Vector2d::Zero();
  double pixels_per_meter = 1.0;
  int margin_px = 0;
  int map_height_px = 0;

  /// Pixel column and row containing `xy`.
  Eigen::Vector2i to_pixel(const Eigen::Vector2d& xy) const;
  /// Map-frame coordinates of a pixel center.
  Eigen::Vector2d to_world(int px, int py) const;
};

struct Rendering {
  Image image;
  RasterFrame frame;
};

/// Fills every polygon with heat_color(count, max_count), darker polygons
/// drawn over lighter ones where they overlap. Throws PipelineError for an
/// empty map.
Rendering render_heatmap(const PolygonMap& map, const HeatMap& heat, const RenderStyle& style = {});

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// One row per map polygon in id order, including zero counts.
void write_heatmap_csv(std::ostream& out, const PolygonMap& map, const HeatMap& heat);
void save_heatmap_csv(const std::filesystem::path& path, const PolygonMap& map,
                      const HeatMap& heat);

}  // namespace roadreg
