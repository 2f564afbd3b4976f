#pragma once

#include <span>
#include <vector>

#include "occworld/occgrid.hpp"

namespace occworld {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

/// Ego motion over a forecast: per-step displacements, each expressed in the
/// ego frame of the previous step, and the waypoints they accumulate to in the
/// frame of the last observed timestamp T. headings[k] is the yaw of step k+1
/// relative to frame T.
struct Trajectory {
  std::vector<Vec2> displacements;
  std::vector<Vec2> waypoints;
  std::vector<double> headings;

  std::size_t size() const { return waypoints.size(); }
};

/// Heading change implied by one displacement: the chord of a constant-rate
/// arc makes half the turning angle with the start heading, so dyaw = 2 *
/// atan2(dy, dx). Steps shorter than 5 cm count as straight.
double heading_change(const Vec2& displacement);

/// Chains displacements into waypoints, rotating each step by the heading
/// accumulated so far.
Trajectory trajectory_from_displacements(std::span<const Vec2> displacements);

/// Ground-truth trajectory from poses: poses[0] is timestamp T, the rest the
/// future. Waypoints are exact positions in frame T.
Trajectory trajectory_from_poses(std::span<const EgoPose> poses);

/// (dx, dy, dyaw) of pose `cur` seen from the ego frame of `prev`.
struct PoseDelta {
  double dx = 0.0, dy = 0.0, dyaw = 0.0;
};
PoseDelta relative_motion(const EgoPose& prev, const EgoPose& cur);

}  // namespace occworld
