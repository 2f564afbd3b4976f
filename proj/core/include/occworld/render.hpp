#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "occworld/occgrid.hpp"
#include "occworld/trajectory.hpp"

namespace occworld {

using Rgb = std::array<std::uint8_t, 3>;

/// Fixed palette; index 0 (free) is the background. Labels past the end
/// reuse the palette cyclically, skipping the background.
Rgb class_color(std::uint8_t label);
inline constexpr Rgb kWaypointColor{255, 0, 255};

/// Top-down RGB image, W pixels wide and H high, forward (h) pointing up and
/// left (w) pointing left: pixel (row, col) shows column (H-1-row, W-1-col).
/// Each pixel takes the color of the highest occupied voxel, or the
/// background when the column is free. Waypoints (meters, ego frame) inside
/// the grid become single marker pixels.
struct Image {
  std::int64_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Rgb pixel(std::int64_t row, std::int64_t col) const;
};

Image render_bev(const OccGrid& grid, std::span<const Vec2> waypoints = {});

/// Binary PPM (P6, max value 255).
std::string encode_ppm(const Image& image);

}  // namespace occworld
