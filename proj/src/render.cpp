#include "roadreg/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>

#include "roadreg/error.hpp"

namespace roadreg {
namespace {

struct Stop {
  double f;
  Rgb c;
};

// Yellow-orange-brown ramp; each channel non-increasing from stop to stop.
constexpr std::array<Stop, 5> kRamp = {{
    {0.00, {255, 255, 229}},
    {0.25, {254, 217, 118}},
    {0.50, {254, 153, 41}},
    {0.75, {204, 76, 4}},
    {1.00, {102, 37, 2}},
}};

constexpr Rgb kOutline = {64, 64, 64};

Rgb ramp(double f) {
  f = std::clamp(f, 0.0, 1.0);
  for (std::size_t i = 1; i < kRamp.size(); ++i) {
    if (f <= kRamp[i].f) {
      const double t = (f - kRamp[i - 1].f) / (kRamp[i].f - kRamp[i - 1].f);
      Rgb c{};
      for (int k = 0; k < 3; ++k) {
        const double a = kRamp[i - 1].c[k];
        const double b = kRamp[i].c[k];
        c[k] = static_cast<std::uint8_t>(std::lround(a + t * (b - a)));
      }
      return c;
    }
  }
  return kRamp.back().c;
}

// 3x5 bitmap digits, one row per entry, bit 2 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits = {{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
}};

void draw_text(Image& img, int x, int y, const std::string& digits, int scale, const Rgb& color) {
  for (const char ch : digits) {
    if (ch < '0' || ch > '9') {
      x += 4 * scale;
      continue;
    }
    const auto& glyph = kDigits[ch - '0'];
    for (int row = 0; row < 5; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (!(glyph[row] & (4 >> col))) continue;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) img.set(x + col * scale + dx, y + row * scale + dy, color);
        }
      }
    }
    x += 4 * scale;
  }
}

void draw_legend(Image& img, int x0, int top, int bottom, std::int64_t max_count) {
  constexpr int kScale = 3;
  constexpr int kBarWidth = 24;
  const int bar_top = top + 7 * kScale;
  const int bar_bottom = bottom - 7 * kScale;
  draw_text(img, x0, top, std::to_string(max_count), kScale, kOutline);
  for (int y = bar_top; y <= bar_bottom; ++y) {
    const double f = bar_bottom == bar_top
                         ? 1.0
                         : 1.0 - static_cast<double>(y - bar_top) / (bar_bottom - bar_top);
    const Rgb c = ramp(f);
    for (int x = x0; x < x0 + kBarWidth; ++x) img.set(x, y, c);
  }
  for (int x = x0 - 1; x <= x0 + kBarWidth; ++x) {
    img.set(x, bar_top - 1, kOutline);
    img.set(x, bar_bottom + 1, kOutline);
  }
  for (int y = bar_top - 1; y <= bar_bottom + 1; ++y) {
    img.set(x0 - 1, y, kOutline);
    img.set(x0 + kBarWidth, y, kOutline);
  }
  draw_text(img, x0, bar_bottom + 2 * kScale, "0", kScale, kOutline);
}

}  // namespace

Rgb Image::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Image::set(int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = c[0];
  pixels[i + 1] = c[1];
  pixels[i + 2] = c[2];
}

Rgb heat_color(std::int64_t count, std::int64_t max_count) {
  if (max_count <= 0 || count <= 0) return ramp(0.0);
  return ramp(static_cast<double>(count) / static_cast<double>(max_count));
}

double luminance(const Rgb& c) { return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]; }

Eigen::Vector2i RasterFrame::to_pixel(const Eigen::Vector2d& xy) const {
  const int col = static_cast<int>(std::floor((xy.x() - min.x()) * pixels_per_meter));
  const int row = static_cast<int>(std::floor((xy.y() - min.y()) * pixels_per_meter));
  return {margin_px + col, margin_px + map_height_px - 1 - row};
}

Eigen::Vector2d RasterFrame::to_world(int px, int py) const {
  const double col = px - margin_px + 0.5;
  const double row = map_height_px - 1 - (py - margin_px) + 0.5;
  return {min.x() + col / pixels_per_meter, min.y() + row / pixels_per_meter};
}

Rendering render_heatmap(const PolygonMap& map, const HeatMap& heat, const RenderStyle& style) {
  if (map.empty()) throw PipelineError("render: polygon map is empty");
  if (style.map_width_px < 1 || style.margin_px < 0 || style.legend_width_px < 0) {
    throw ConfigError("render: invalid style dimensions");
  }
  const auto [lo, hi] = map.bounds();
  const Eigen::Vector2d extent = (hi - lo).cwiseMax(1e-6);

  Rendering out;
  RasterFrame& frame = out.frame;
  frame.min = lo;
  frame.pixels_per_meter = style.map_width_px / extent.x();
  frame.margin_px = style.margin_px;
  frame.map_height_px = std::max(1, static_cast<int>(std::ceil(extent.y() * frame.pixels_per_meter)));

  Image& img = out.image;
  img.width = 2 * style.margin_px + style.map_width_px + style.legend_width_px;
  img.height = 2 * style.margin_px + std::max(frame.map_height_px, 160);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) img.set(x, y, style.background);
  }

  std::vector<const SubLanePolygon*> order;
  order.reserve(map.polygons().size());
  for (const auto& p : map.polygons()) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [&](const auto* a, const auto* b) {
    const auto ca = heat.count(a->id);
    const auto cb = heat.count(b->id);
    return ca < cb || (ca == cb && a->id < b->id);
  });

  for (const auto* poly : order) {
    const Rgb color = heat_color(heat.count(poly->id), heat.max_count);
    Eigen::Vector2i pmin = frame.to_pixel(poly->vertices[0]);
    Eigen::Vector2i pmax = pmin;
    for (const auto& v : poly->vertices) {
      const Eigen::Vector2i p = frame.to_pixel(v);
      pmin = pmin.cwiseMin(p);
      pmax = pmax.cwiseMax(p);
    }
    for (int y = std::max(0, pmin.y()); y <= std::min(img.height - 1, pmax.y()); ++y) {
      for (int x = std::max(0, pmin.x()); x <= std::min(img.width - 1, pmax.x()); ++x) {
        if (poly->contains(frame.to_world(x, y))) img.set(x, y, color);
      }
    }
  }

  if (style.legend_width_px > 0) {
    draw_legend(img, 2 * style.margin_px + style.map_width_px,
                style.margin_px, img.height - style.margin_px, heat.max_count);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw PipelineError("render: cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw PipelineError("render: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PipelineError("render: PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw PipelineError("render: cannot read " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PipelineError("render: libpng initialisation failed");
  }
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PipelineError("render: PNG decoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  for (int y = 0; y < image.height; ++y) {
    png_read_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_heatmap_csv(std::ostream& out, const PolygonMap& map, const HeatMap& heat) {
  out << "horizon_windows,max_count\n" << heat.horizon_windows << ',' << heat.max_count << '\n';
  out << "polygon_id,count\n";
  std::vector<std::int64_t> ids;
  ids.reserve(map.polygons().size());
  for (const auto& p : map.polygons()) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  for (const auto id : ids) out << id << ',' << heat.count(id) << '\n';
}

void save_heatmap_csv(const std::filesystem::path& path, const PolygonMap& map,
                      const HeatMap& heat) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("render: cannot write " + path.string());
  write_heatmap_csv(out, map, heat);
}

}  // namespace roadreg
