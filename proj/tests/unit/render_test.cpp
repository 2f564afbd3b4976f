#include <gtest/gtest.h>

#include <set>
#include <string>

#include "occworld/render.hpp"
#include "occworld/rng.hpp"

namespace occworld {
namespace {

TEST(Render, AllFreeFrameIsUniformBackground) {
  const OccGrid g({12, 20, 3}, 6);
  const auto img = render_bev(g);
  EXPECT_EQ(img.width, 20);
  EXPECT_EQ(img.height, 12);
  for (std::int64_t r = 0; r < img.height; ++r) {
    for (std::int64_t c = 0; c < img.width; ++c) EXPECT_EQ(img.pixel(r, c), class_color(kFree));
  }
}

TEST(Render, VehicleBlockLandsOnExpectedPixels) {
  // Voxels h in [2, 5), w in [6, 8) map to rows H-1-h and columns W-1-w.
  OccGrid g({10, 12, 4}, 6);
  for (std::int64_t h = 2; h < 5; ++h)
    for (std::int64_t w = 6; w < 8; ++w)
      for (std::int64_t d = 0; d < 3; ++d) g.set(h, w, d, kVehicle);
  const auto img = render_bev(g);
  int hits = 0;
  for (std::int64_t r = 0; r < 10; ++r) {
    for (std::int64_t c = 0; c < 12; ++c) {
      const bool inside = r >= 5 && r <= 7 && c >= 4 && c <= 5;
      EXPECT_EQ(img.pixel(r, c), inside ? class_color(kVehicle) : class_color(kFree)) << r << "," << c;
      hits += inside;
    }
  }
  EXPECT_EQ(hits, 6);
}

TEST(Render, HighestOccupiedVoxelWinsOverRandomGrids) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const GridDims dims{rng.uniform_int(1, 9), rng.uniform_int(1, 9), rng.uniform_int(1, 4)};
    OccGrid g(dims, 6);
    for (auto& v : g.mutable_labels()) v = rng.uniform() < 0.4 ? static_cast<std::uint8_t>(rng.uniform_int(1, 5)) : 0;
    const auto img = render_bev(g);
    for (std::int64_t h = 0; h < dims.h; ++h) {
      for (std::int64_t w = 0; w < dims.w; ++w) {
        std::uint8_t top = 0;
        for (std::int64_t d = 0; d < dims.d; ++d) {
          if (g.at(h, w, d)) top = g.at(h, w, d);
        }
        EXPECT_EQ(img.pixel(dims.h - 1 - h, dims.w - 1 - w), class_color(top));
      }
    }
  }
}

TEST(Render, WaypointsBecomeMarkers) {
  const OccGrid g({20, 20, 2}, 6, 0.5);
  // 2 m ahead = 4 voxels forward of the ego cell (10, 10); outside points are dropped.
  const std::vector<Vec2> wp{{2.0, 0.0}, {100.0, 0.0}};
  const auto img = render_bev(g, wp);
  EXPECT_EQ(img.pixel(20 - 1 - 14, 20 - 1 - 10), kWaypointColor);
  int marks = 0;
  for (std::int64_t r = 0; r < 20; ++r)
    for (std::int64_t c = 0; c < 20; ++c) marks += img.pixel(r, c) == kWaypointColor;
  EXPECT_EQ(marks, 1);
}

TEST(Render, PpmHeaderAndPaletteAreDistinct) {
  OccGrid g({3, 4, 1}, 6);
  g.set(0, 0, 0, kBuilding);
  const auto ppm = encode_ppm(render_bev(g));
  const std::string header = "P6\n4 3\n255\n";
  ASSERT_EQ(ppm.substr(0, header.size()), header);
  EXPECT_EQ(ppm.size(), header.size() + 4 * 3 * 3);
  std::set<Rgb> colors;
  for (std::uint8_t c = 0; c < 6; ++c) colors.insert(class_color(c));
  colors.insert(kWaypointColor);
  EXPECT_EQ(colors.size(), 7u);
  EXPECT_NE(class_color(9), class_color(kFree));
}

}  // namespace
}  // namespace occworld
