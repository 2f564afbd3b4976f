#include "occworld/render.hpp"

#include <cmath>

namespace occworld {

namespace {

constexpr std::array<Rgb, 6> kPalette{{
    {24, 24, 32},     // free
    {128, 128, 128},  // drivable
    {200, 180, 140},  // sidewalk
    {70, 110, 200},   // building
    {230, 120, 30},   // vehicle
    {60, 200, 80},    // pedestrian
}};

}  // namespace

Rgb class_color(std::uint8_t label) {
  if (label < kPalette.size()) return kPalette[label];
  return kPalette[1 + (label - 1) % (kPalette.size() - 1)];
}

Rgb Image::pixel(std::int64_t row, std::int64_t col) const {
  const auto i = static_cast<std::size_t>((row * width + col) * 3);
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Image render_bev(const OccGrid& grid, std::span<const Vec2> waypoints) {
  const auto& dims = grid.dims();
  Image img;
  img.width = dims.w;
  img.height = dims.h;
  img.rgb.resize(static_cast<std::size_t>(dims.h * dims.w * 3));
  const auto put = [&](std::int64_t h, std::int64_t w, const Rgb& c) {
    const auto i = static_cast<std::size_t>(((dims.h - 1 - h) * dims.w + (dims.w - 1 - w)) * 3);
    img.rgb[i] = c[0];
    img.rgb[i + 1] = c[1];
    img.rgb[i + 2] = c[2];
  };
  for (std::int64_t h = 0; h < dims.h; ++h) {
    for (std::int64_t w = 0; w < dims.w; ++w) {
      std::uint8_t top = kFree;
      for (std::int64_t d = dims.d - 1; d >= 0; --d) {
        if (grid.at(h, w, d) != kFree) {
          top = grid.at(h, w, d);
          break;
        }
      }
      put(h, w, class_color(top));
    }
  }
  const double vs = grid.voxel_size();
  for (const auto& p : waypoints) {
    const auto h = static_cast<std::int64_t>(std::floor(p.x / vs + dims.h / 2.0));
    const auto w = static_cast<std::int64_t>(std::floor(p.y / vs + dims.w / 2.0));
    if (h >= 0 && h < dims.h && w >= 0 && w < dims.w) put(h, w, kWaypointColor);
  }
  return img;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

}  // namespace occworld
