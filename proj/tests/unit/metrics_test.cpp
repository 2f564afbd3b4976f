#include <gtest/gtest.h>

#include <cmath>

#include "occworld/errors.hpp"
#include "occworld/eval/metrics.hpp"
#include "occworld/rng.hpp"
#include "occworld/synthetic.hpp"

namespace occworld {
namespace {

using eval::L2Mode;

OccGrid random_grid(GridDims dims, std::uint32_t classes, Rng& rng, double p_free = 0.5) {
  std::vector<std::uint8_t> l(static_cast<std::size_t>(dims.voxels()));
  for (auto& v : l) v = rng.uniform() < p_free ? 0 : static_cast<std::uint8_t>(rng.uniform_int(1, classes - 1));
  return OccGrid(dims, classes, l);
}

TEST(IouBinary, Basics) {
  OccGrid a({2, 2, 1}, 6, {1, 0, 0, 0});
  OccGrid b({2, 2, 1}, 6, {0, 3, 0, 0});
  EXPECT_EQ(eval::iou_binary(a, a), 1.0);
  EXPECT_EQ(eval::iou_binary(a, b), 0.0);
  OccGrid c({2, 2, 1}, 6, {1, 2, 0, 0});
  OccGrid d({2, 2, 1}, 6, {0, 4, 5, 0});
  EXPECT_DOUBLE_EQ(eval::iou_binary(c, d), 1.0 / 3.0);
  EXPECT_EQ(eval::iou_binary(OccGrid({2, 2, 1}, 6), OccGrid({2, 2, 1}, 6)), 1.0);
  EXPECT_THROW(eval::iou_binary(a, OccGrid({1, 2, 2}, 6)), ShapeError);
}

TEST(MiouSemantic, IdentityAndEmptyPrediction) {
  Rng rng(1);
  auto g = random_grid({4, 4, 2}, 6, rng);
  EXPECT_EQ(eval::miou_semantic(g, g).miou, 1.0);
  OccGrid gt({4, 4, 2}, 6);
  gt.set(1, 1, 0, kVehicle);
  auto r = eval::miou_semantic(OccGrid({4, 4, 2}, 6), gt);
  EXPECT_EQ(r.miou, 0.0);
  EXPECT_EQ(r.per_class[kVehicle - 1].iou(), 0.0);
  EXPECT_TRUE(r.per_class[kVehicle - 1].in_gt);
}

// Brute-force triple loop over (h, w, d) for each class.
TEST(Metrics, MatchCountingOracleOnRandomGrids) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const GridDims dims{4, 4, 2};
    auto a = random_grid(dims, 6, rng), b = random_grid(dims, 6, rng);
    double sum = 0;
    int present = 0;
    for (std::uint8_t c = 1; c < 6; ++c) {
      int inter = 0, uni = 0, in_gt = 0;
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w)
          for (int d = 0; d < 2; ++d) {
            const bool pa = a.at(h, w, d) == c, pb = b.at(h, w, d) == c;
            inter += pa && pb;
            uni += pa || pb;
            in_gt += pb;
          }
      if (in_gt == 0) continue;
      sum += static_cast<double>(inter) / uni;
      ++present;
    }
    const double expect = present ? sum / present : 1.0;
    EXPECT_NEAR(eval::miou_semantic(a, b).miou, expect, 1e-12) << seed;
    int oi = 0, ou = 0;
    for (std::size_t i = 0; i < a.labels().size(); ++i) {
      oi += a.labels()[i] && b.labels()[i];
      ou += a.labels()[i] || b.labels()[i];
    }
    EXPECT_NEAR(eval::iou_binary(a, b), ou ? static_cast<double>(oi) / ou : 1.0, 1e-12);
    EXPECT_EQ(eval::iou_binary(a, b), eval::iou_binary(b, a));
  }
}

TEST(IouAccumulator, PoolsCountsAcrossPairs) {
  OccGrid g1({1, 2, 1}, 6, {kVehicle, 0});
  OccGrid p1({1, 2, 1}, 6, {kVehicle, kVehicle});
  OccGrid g2({1, 2, 1}, 6, {kVehicle, kVehicle});
  OccGrid p2({1, 2, 1}, 6, {kVehicle, kVehicle});
  eval::IouAccumulator acc;
  acc.add(p1, g1);
  acc.add(p2, g2);
  // vehicle: intersection 3, union 4.
  EXPECT_DOUBLE_EQ(acc.miou().miou, 0.75);
  EXPECT_DOUBLE_EQ(acc.iou(), 0.75);
}

Trajectory line(std::vector<Vec2> w) {
  Trajectory t;
  t.waypoints = std::move(w);
  t.headings.assign(t.waypoints.size(), 0.0);
  return t;
}

TEST(L2, IdentityAndConstantOffset) {
  const std::vector<int> hz{1, 2, 3};
  auto gt = line({{1, 0}, {2, 0}, {3, 1}});
  for (auto mode : {L2Mode::kAtHorizon, L2Mode::kAveragedUpToHorizon}) {
    for (double v : eval::l2_error(gt, gt, hz, mode)) EXPECT_EQ(v, 0.0);
    auto off = line({{1.6, 0.8}, {2.6, 0.8}, {3.6, 1.8}});
    for (double v : eval::l2_error(off, gt, hz, mode)) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(L2, DualModeHandExample) {
  auto pred = line({{1, 0}, {2, 0}});
  auto gt = line({{1, 0}, {3, 0}});
  const std::vector<int> h2{2};
  EXPECT_EQ(eval::l2_error(pred, gt, h2, L2Mode::kAtHorizon)[0], 1.0);
  EXPECT_EQ(eval::l2_error(pred, gt, h2, L2Mode::kAveragedUpToHorizon)[0], 0.5);
  const std::vector<int> h1{1};
  EXPECT_EQ(eval::l2_error(pred, gt, h1, L2Mode::kAtHorizon), eval::l2_error(pred, gt, h1, L2Mode::kAveragedUpToHorizon));
  const std::vector<int> h3{3};
  EXPECT_THROW(eval::l2_error(pred, gt, h3, L2Mode::kAtHorizon), LengthError);
}

TEST(Trajectory, ChainingAndGroundTruth) {
  std::vector<Vec2> d{{1.0, 0.0}, {2.0, 0.0}};
  auto t = trajectory_from_displacements(d);
  EXPECT_EQ(t.waypoints[0], (Vec2{1.0, 0.0}));
  EXPECT_EQ(t.waypoints[1], (Vec2{3.0, 0.0}));
  // Constant-rate arc: chaining the chords with the implied heading changes
  // recovers the exact ground-truth waypoints.
  SceneConfig c;
  c.num_vehicles = c.num_pedestrians = 0;
  c.profile = EgoProfile::kTurn;
  c.ego_speed = 4.0;
  c.turn_rate = 0.3;
  auto seq = generate_synthetic_world(c, 7);
  std::vector<EgoPose> poses;
  for (const auto& f : seq.frames) poses.push_back(f.pose);
  auto gt = trajectory_from_poses(poses);
  auto chained = trajectory_from_displacements(gt.displacements);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    EXPECT_NEAR(chained.waypoints[k].x, gt.waypoints[k].x, 1e-5);
    EXPECT_NEAR(chained.waypoints[k].y, gt.waypoints[k].y, 1e-5);
  }
}

TEST(Collision, EmptyWorldNeverCollides) {
  std::vector<OccGrid> future(3, OccGrid({64, 64, 8}, 6));
  auto t = line({{1, 0}, {2, 0}, {3, 0}});
  auto flags = eval::collisions(t, t, future);
  std::vector<std::vector<bool>> samples{flags};
  for (double r : eval::collision_rate(samples, std::vector<int>{1, 2, 3})) EXPECT_EQ(r, 0.0);
}

TEST(Collision, InsideBuildingAlwaysCollides) {
  OccGrid g({64, 64, 8}, 6);
  for (int h = 20; h < 44; ++h)
    for (int w = 20; w < 44; ++w)
      for (int d = 0; d < 6; ++d) g.set(h, w, d, kBuilding);
  auto pred = line({{0.5, 0.2}});
  auto gt = line({{0.0, 0.0}});
  EXPECT_TRUE(eval::collisions(pred, gt, std::vector<OccGrid>{g})[0]);
}

TEST(Collision, ClosedCellBoundaryCountsAsOverlap) {
  // Axis-aligned 4 m x 2 m footprint centred at the origin spans x in [-2, 2],
  // y in [-1, 1]. Voxel (h, w) covers x in [(h-32)*0.4, (h-31)*0.4]; h = 37
  // starts at x = 2.0 exactly, so it touches the front edge; h = 38 does not.
  auto pred = line({{0.0, 0.0}});
  for (auto [h, expect] : {std::pair{37, true}, std::pair{38, false}}) {
    OccGrid g({64, 64, 8}, 6);
    g.set(h, 32, 1, kVehicle);
    EXPECT_EQ(eval::collisions(pred, pred, std::vector<OccGrid>{g})[0], expect) << h;
  }
  // Corner contact: a 4 m x 2.4 m footprint ends at (2.0, 1.2), exactly the
  // lower-left corner of voxel (37, 35).
  eval::CollisionParams wide;
  wide.width = 2.4;
  for (auto [h, w, expect] : {std::tuple{37, 35, true}, std::tuple{38, 35, false}, std::tuple{37, 36, false}}) {
    OccGrid g({64, 64, 8}, 6);
    g.set(h, w, 0, kPedestrian);
    EXPECT_EQ(eval::collisions(pred, pred, std::vector<OccGrid>{g}, wide)[0], expect) << h << "," << w;
  }
  // Above the 2 m band: layer 5 starts at 2.0 m.
  OccGrid high({64, 64, 8}, 6);
  high.set(32, 32, 5, kBuilding);
  EXPECT_FALSE(eval::collisions(pred, pred, std::vector<OccGrid>{high})[0]);
}

TEST(Collision, RateMonotoneInHorizon) {
  std::vector<std::vector<bool>> s{{false, true, false}, {false, false, false}, {true, false, false}};
  auto r = eval::collision_rate(s, std::vector<int>{1, 2, 3});
  EXPECT_NEAR(r[0], 100.0 / 3, 1e-12);
  EXPECT_NEAR(r[1], 200.0 / 3, 1e-12);
  EXPECT_NEAR(r[2], 200.0 / 3, 1e-12);
  auto t = line({{1, 0}});
  EXPECT_THROW(eval::collisions(t, t, std::vector<OccGrid>{}), LengthError);
}

TEST(CopyPaste, RepeatsLastFrame) {
  SceneConfig c;
  c.num_vehicles = c.num_pedestrians = 0;
  auto seq = generate_synthetic_world(c, 5);
  std::vector<OccGrid> hist;
  for (const auto& f : seq.frames) hist.push_back(f.grid);
  auto out = eval::copy_paste_baseline(hist, 3);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& g : out) EXPECT_EQ(eval::miou_semantic(g, seq.frames[4].grid).miou, 1.0);
}

TEST(CopyPaste, MovingVehicleIouDecays) {
  // Vehicle 10 long moving 2 cells/frame along h: after k frames the overlap
  // with the copied footprint is (10 - 2k) * 5 * 3 voxels of a union of
  // (10 + 2k) * 5 * 3, so IoU = (10 - 2k) / (10 + 2k).
  SceneConfig c;
  c.num_vehicles = c.num_pedestrians = 0;
  c.static_layout = false;
  c.agents.push_back({AgentKind::kVehicle, 10, 10, 2, 0});
  auto seq = generate_synthetic_world(c, 6);
  std::vector<OccGrid> hist{seq.frames[0].grid};
  auto out = eval::copy_paste_baseline(hist, 5);
  double prev = 2.0;
  for (int k = 1; k <= 5; ++k) {
    auto r = eval::miou_semantic(out[static_cast<std::size_t>(k - 1)], seq.frames[static_cast<std::size_t>(k)].grid);
    const double v = r.per_class[kVehicle - 1].iou();
    EXPECT_NEAR(v, (10.0 - 2 * k) / (10.0 + 2 * k), 1e-12) << k;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

}  // namespace
}  // namespace occworld
