#include "occworld/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "occworld/errors.hpp"
#include "occworld/rng.hpp"

namespace occworld {

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kEgoClearance = 6.0;  // m ahead of the ego before same-lane traffic may spawn
constexpr double kLaneChangeStart = 1.0;     // s
constexpr double kLaneChangeDuration = 3.0;  // s

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

struct Pose {
  double x = 0, y = 0, yaw = 0;
};

Pose ego_pose(const SceneConfig& c, double t) {
  const double v = c.ego_speed;
  switch (c.profile) {
    case EgoProfile::kConstantVelocity:
      return {v * t, 0.0, 0.0};
    case EgoProfile::kTurn: {
      const double w = c.turn_rate;
      if (v <= 0.0) return {};
      if (std::abs(w) < 1e-12) return {v * t, 0.0, 0.0};
      return {v / w * std::sin(w * t), v / w * (1.0 - std::cos(w * t)), wrap_angle(w * t)};
    }
    case EgoProfile::kLaneChange: {
      if (v <= 0.0) return {};  // a standing car does not change lanes
      const double tau = std::clamp((t - kLaneChangeStart) / kLaneChangeDuration, 0.0, 1.0);
      const double y = c.lane_change_offset * tau * tau * (3.0 - 2.0 * tau);
      const double vy = c.lane_change_offset * 6.0 * tau * (1.0 - tau) / kLaneChangeDuration;
      return {v * t, y, std::atan2(vy, v)};
    }
  }
  return {};
}

struct Block {
  double x0, x1;
  int height;
};

// Straight road along world x with sidewalks and a row of building blocks on
// each side; gaps between blocks are side streets (drivable).
struct Layout {
  bool enabled = false;
  int lanes = 1;  // per direction
  double center = kLaneWidth / 2;  // the ego starts in the first lane right of center
  double half_width = kLaneWidth;
  double sidewalk = 3.0;
  std::vector<Block> left, right;

  void column(double x, double y, std::uint8_t& ground, int& building) const {
    ground = kFree;
    building = 0;
    if (!enabled) return;
    const double off = y - center;
    const double a = std::abs(off);
    if (a <= half_width) {
      ground = kDrivable;
    } else if (a <= half_width + sidewalk) {
      ground = kSidewalk;
    } else {
      const auto& blocks = off > 0 ? left : right;
      ground = kDrivable;
      for (const auto& b : blocks) {
        if (x >= b.x0 && x < b.x1) {
          ground = kBuilding;
          building = b.height;
          break;
        }
      }
    }
  }
};

Layout make_layout(const SceneConfig& c, Rng& rng) {
  Layout l;
  l.enabled = c.static_layout;
  l.lanes = static_cast<int>(rng.uniform_int(1, 2));
  l.half_width = l.lanes * kLaneWidth;
  l.sidewalk = rng.uniform(2.0, 4.0);
  const auto max_h = static_cast<int>(c.dims.d);
  for (auto* side : {&l.left, &l.right}) {
    double x = -150.0 + rng.uniform(0.0, 10.0);
    while (x < 250.0) {
      const double len = rng.uniform(8.0, 24.0);
      const int h = static_cast<int>(rng.uniform_int(std::min(3, max_h), max_h));
      side->push_back({x, x + len, h});
      x += len + rng.uniform(4.0, 10.0);
    }
  }
  return l;
}

struct Agent {
  AgentKind kind;
  double x, y;    // world meters (center of the center cell)
  double vx, vy;  // world m/s
};

struct Footprint {
  std::int64_t len, wid, height;
};

Footprint footprint(AgentKind k) {
  return k == AgentKind::kVehicle ? Footprint{kVehicleLength, kVehicleWidth, kVehicleHeight}
                                  : Footprint{kPedestrianLength, kPedestrianWidth, kPedestrianHeight};
}

class Frame {
 public:
  Frame(const SceneConfig& c, const Pose& p) : c_(c), p_(p), cs_(std::cos(p.yaw)), sn_(std::sin(p.yaw)) {}

  // Continuous cell coordinates (cell centers are integers) of a world point.
  void to_cell(double x, double y, double& u, double& v) const {
    const double dx = x - p_.x, dy = y - p_.y;
    const double lx = cs_ * dx + sn_ * dy, ly = -sn_ * dx + cs_ * dy;
    u = lx / c_.voxel_size + static_cast<double>(c_.dims.h) / 2.0 - 0.5;
    v = ly / c_.voxel_size + static_cast<double>(c_.dims.w) / 2.0 - 0.5;
  }
  void to_world(double u, double v, double& x, double& y) const {
    const double lx = (u + 0.5 - static_cast<double>(c_.dims.h) / 2.0) * c_.voxel_size;
    const double ly = (v + 0.5 - static_cast<double>(c_.dims.w) / 2.0) * c_.voxel_size;
    x = p_.x + cs_ * lx - sn_ * ly;
    y = p_.y + sn_ * lx + cs_ * ly;
  }
  void rotate_to_local(double vx, double vy, double& lx, double& ly) const {
    lx = cs_ * vx + sn_ * vy;
    ly = -sn_ * vx + cs_ * vy;
  }
  void rotate_to_world(double lx, double ly, double& vx, double& vy) const {
    vx = cs_ * lx - sn_ * ly;
    vy = sn_ * lx + cs_ * ly;
  }

 private:
  const SceneConfig& c_;
  Pose p_;
  double cs_, sn_;
};

// Keeps the footprint inside the grid of `frame`; a blocked velocity
// component pointing outward is reflected.
void clamp_agent(Agent& a, const SceneConfig& c, const Frame& frame) {
  const auto fp = footprint(a.kind);
  double u, v;
  frame.to_cell(a.x, a.y, u, v);
  double lvx, lvy;
  frame.rotate_to_local(a.vx, a.vy, lvx, lvy);
  bool moved = false;
  auto fix = [&](double& coord, double& vel, std::int64_t len, std::int64_t extent) {
    const double cell = std::floor(coord + 0.5);
    const double lo = static_cast<double>(len / 2);
    const double hi = static_cast<double>(extent - len + len / 2);
    if (cell < lo) {
      coord += lo - cell;
      if (vel < 0) vel = -vel;
      moved = true;
    } else if (cell > hi) {
      coord -= cell - hi;
      if (vel > 0) vel = -vel;
      moved = true;
    }
  };
  fix(u, lvx, fp.len, c.dims.h);
  fix(v, lvy, fp.wid, c.dims.w);
  if (moved) {
    frame.to_world(u, v, a.x, a.y);
    frame.rotate_to_world(lvx, lvy, a.vx, a.vy);
  }
}

double cell_center(double cell, std::int64_t extent, double vs) {
  return (cell + 0.5 - static_cast<double>(extent) / 2.0) * vs;
}

std::vector<Agent> spawn_agents(const SceneConfig& c, const Layout& layout, Rng& rng) {
  std::vector<Agent> agents;
  const double vs = c.voxel_size;
  const double dt = c.frame_dt_ms / 1000.0;
  for (const auto& s : c.agents) {
    agents.push_back({s.kind, cell_center(s.h, c.dims.h, vs), cell_center(s.w, c.dims.w, vs), s.dh * vs / dt,
                      s.dw * vs / dt});
  }
  auto pick = [&](const std::vector<double>& speeds) {
    return speeds.empty() ? 0.0 : speeds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(speeds.size()) - 1))];
  };
  auto snap_w = [&](double y) { return cell_center(std::floor(y / vs + c.dims.w / 2.0), c.dims.w, vs); };
  auto overlaps = [&](AgentKind kind, double x, double y) {
    const auto fp = footprint(kind);
    for (const auto& a : agents) {
      const auto fa = footprint(a.kind);
      if (std::abs(a.x - x) < (fp.len + fa.len) * vs / 2 + vs && std::abs(a.y - y) < (fp.wid + fa.wid) * vs / 2 + vs) {
        return true;
      }
    }
    return false;
  };

  for (int i = 0; i < c.num_vehicles; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double hc = static_cast<double>(rng.uniform_int(kVehicleLength / 2, c.dims.h - kVehicleLength + kVehicleLength / 2));
      const double x = cell_center(hc, c.dims.h, vs);
      double y, dir;
      if (layout.enabled) {
        const int lane = static_cast<int>(rng.uniform_int(0, 2 * layout.lanes - 1));
        const bool oncoming = lane >= layout.lanes;
        const int j = oncoming ? lane - layout.lanes : lane;
        y = layout.center + (oncoming ? 1.0 : -1.0) * (kLaneWidth / 2 + j * kLaneWidth);
        dir = oncoming ? -1.0 : 1.0;
      } else {
        y = cell_center(static_cast<double>(rng.uniform_int(kVehicleWidth / 2, c.dims.w - kVehicleWidth + kVehicleWidth / 2)),
                        c.dims.w, vs);
        dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
      }
      y = snap_w(y);
      double speed = pick(c.vehicle_speeds);
      // Traffic in the ego's own lane starts ahead of it and is never slower,
      // so the ego does not spawn inside or run into it.
      if (layout.enabled && dir > 0 && std::abs(y) < kLaneWidth / 2) {
        if (x < kEgoClearance) continue;
        if (speed < c.ego_speed) continue;
      }
      double u = (y / vs + c.dims.w / 2.0 - 0.5);
      if (u < kVehicleWidth / 2 || u > c.dims.w - kVehicleWidth + kVehicleWidth / 2) continue;
      if (overlaps(AgentKind::kVehicle, x, y)) continue;
      agents.push_back({AgentKind::kVehicle, x, y, dir * speed, 0.0});
      break;
    }
  }
  for (int i = 0; i < c.num_pedestrians; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double x = cell_center(static_cast<double>(rng.uniform_int(0, c.dims.h - 1)), c.dims.h, vs);
      double y;
      if (layout.enabled) {
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        y = layout.center + side * (layout.half_width + rng.uniform(0.3, layout.sidewalk - 0.3));
      } else {
        y = cell_center(static_cast<double>(rng.uniform_int(0, c.dims.w - 1)), c.dims.w, vs);
      }
      y = snap_w(y);
      const double u = y / vs + c.dims.w / 2.0 - 0.5;
      if (u < 0 || u > c.dims.w - 1) continue;
      if (overlaps(AgentKind::kPedestrian, x, y)) continue;
      const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
      agents.push_back({AgentKind::kPedestrian, x, y, dir * pick(c.pedestrian_speeds), 0.0});
      break;
    }
  }
  return agents;
}

void rasterize(const SceneConfig& c, const Layout& layout, const std::vector<Agent>& agents, const Frame& frame,
               OccGrid& grid) {
  const double vs = c.voxel_size;
  auto labels = grid.mutable_labels();
  for (std::int64_t h = 0; h < c.dims.h; ++h) {
    for (std::int64_t w = 0; w < c.dims.w; ++w) {
      double x, y;
      frame.to_world(static_cast<double>(h), static_cast<double>(w), x, y);
      std::uint8_t ground;
      int building;
      layout.column(x, y, ground, building);
      const std::int64_t base = grid.index(h, w, 0);
      labels[base] = ground;
      for (std::int64_t d = 1; d < c.dims.d; ++d) labels[base + d] = d < building ? kBuilding : kFree;
      for (const auto& a : agents) {
        const auto fp = footprint(a.kind);
        const double dx = x - a.x, dy = y - a.y;
        const bool inside = dx >= -(fp.len / 2 + 0.5) * vs && dx < (fp.len - fp.len / 2 - 0.5) * vs &&
                            dy >= -(fp.wid / 2 + 0.5) * vs && dy < (fp.wid - fp.wid / 2 - 0.5) * vs;
        if (!inside) continue;
        const std::uint8_t label = a.kind == AgentKind::kVehicle ? kVehicle : kPedestrian;
        for (std::int64_t d = 0; d < std::min(fp.height, c.dims.d); ++d) labels[base + d] = label;
      }
    }
  }
}

}  // namespace

void SceneConfig::validate() const {
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ConfigError("scene: grid extents must be >= 1");
  if (num_classes < kDefaultNumClasses || num_classes > 256) {
    throw ConfigError("scene: the synthetic world needs num_classes in [6, 256]");
  }
  if (!(voxel_size > 0.0) || frame_dt_ms == 0) throw ConfigError("scene: voxel size and frame_dt must be positive");
  if (num_vehicles < 0 || num_pedestrians < 0) throw ConfigError("scene: agent counts must be >= 0");
  if (num_vehicles > 0 && (dims.h < kVehicleLength || dims.w < kVehicleWidth)) {
    throw ConfigError("scene: grid too small to hold a vehicle");
  }
  if (!std::isfinite(ego_speed) || !std::isfinite(turn_rate) || !std::isfinite(lane_change_offset)) {
    throw ConfigError("scene: non-finite ego motion parameters");
  }
  for (const auto& a : agents) {
    if (!std::isfinite(a.h) || !std::isfinite(a.w) || !std::isfinite(a.dh) || !std::isfinite(a.dw)) {
      throw ConfigError("scene: non-finite agent spec");
    }
  }
}

OccSequence generate_synthetic_world(const SceneConfig& config, std::int64_t num_frames) {
  config.validate();
  if (num_frames < 1) throw ConfigError("scene: num_frames must be >= 1");
  Rng layout_rng(mix_seed(config.seed, 1));
  Rng agent_rng(mix_seed(config.seed, 2));
  const Layout layout = make_layout(config, layout_rng);
  std::vector<Agent> agents = spawn_agents(config, layout, agent_rng);

  OccSequence seq;
  seq.frame_dt_ms = config.frame_dt_ms;
  seq.seed = config.seed;
  seq.scene_id = "scene-" + std::to_string(config.seed);
  const double dt = config.frame_dt_ms / 1000.0;
  for (std::int64_t k = 0; k < num_frames; ++k) {
    const Pose pose = ego_pose(config, static_cast<double>(k) * dt);
    const Frame frame(config, pose);
    for (auto& a : agents) {
      if (k > 0) {
        a.x += a.vx * dt;
        a.y += a.vy * dt;
      }
      clamp_agent(a, config, frame);
    }
    OccFrame f;
    f.grid = OccGrid(config.dims, config.num_classes, config.voxel_size);
    rasterize(config, layout, agents, frame, f.grid);
    f.pose = {static_cast<float>(pose.x), static_cast<float>(pose.y), static_cast<float>(wrap_angle(pose.yaw))};
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

SceneConfig sample_scene_config(std::uint64_t seed, GridDims dims, const ScenarioMix& mix) {
  Rng rng(mix_seed(seed, 3));
  SceneConfig c;
  c.dims = dims;
  c.seed = seed;
  c.num_vehicles = static_cast<int>(rng.uniform_int(0, mix.max_vehicles));
  c.num_pedestrians = static_cast<int>(rng.uniform_int(0, mix.max_pedestrians));
  if (!mix.ego_speeds.empty()) {
    c.ego_speed = mix.ego_speeds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(mix.ego_speeds.size()) - 1))];
  }
  const double r = rng.uniform();
  if (r < mix.p_lane_change) {
    c.profile = EgoProfile::kLaneChange;
    c.lane_change_offset = rng.uniform() < 0.5 ? kLaneWidth : -kLaneWidth;
  } else if (r < mix.p_lane_change + mix.p_turn) {
    c.profile = EgoProfile::kTurn;
    c.turn_rate = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.3);
  } else {
    c.profile = EgoProfile::kConstantVelocity;
  }
  return c;
}

}  // namespace occworld
