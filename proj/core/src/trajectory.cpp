#include "occworld/trajectory.hpp"

#include <cmath>
#include <numbers>

namespace occworld {

namespace {

double wrap(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

}  // namespace

double heading_change(const Vec2& d) {
  if (std::hypot(d.x, d.y) < 0.05 || d.x <= 0.0) return 0.0;
  return 2.0 * std::atan2(d.y, d.x);
}

Trajectory trajectory_from_displacements(std::span<const Vec2> displacements) {
  Trajectory t;
  double x = 0, y = 0, yaw = 0;
  for (const auto& d : displacements) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    x += c * d.x - s * d.y;
    y += s * d.x + c * d.y;
    yaw = wrap(yaw + heading_change(d));
    t.displacements.push_back(d);
    t.waypoints.push_back({x, y});
    t.headings.push_back(yaw);
  }
  return t;
}

PoseDelta relative_motion(const EgoPose& prev, const EgoPose& cur) {
  const double dx = static_cast<double>(cur.x) - prev.x, dy = static_cast<double>(cur.y) - prev.y;
  const double c = std::cos(prev.yaw), s = std::sin(prev.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, wrap(static_cast<double>(cur.yaw) - prev.yaw)};
}

Trajectory trajectory_from_poses(std::span<const EgoPose> poses) {
  Trajectory t;
  if (poses.empty()) return t;
  for (std::size_t k = 1; k < poses.size(); ++k) {
    const auto step = relative_motion(poses[k - 1], poses[k]);
    const auto total = relative_motion(poses[0], poses[k]);
    t.displacements.push_back({step.dx, step.dy});
    t.waypoints.push_back({total.dx, total.dy});
    t.headings.push_back(total.dyaw);
  }
  return t;
}

}  // namespace occworld
