#pragma once

#include <cstdint>
#include <vector>

#include "occworld/occgrid.hpp"

namespace occworld {

enum class EgoProfile { kConstantVelocity, kLaneChange, kTurn };

enum class AgentKind { kVehicle, kPedestrian };

/// An agent placed by hand: its center cell and per-frame velocity in cells,
/// both in the t = 0 grid frame (h forward, w left).
struct AgentSpec {
  AgentKind kind = AgentKind::kVehicle;
  double h = 0.0;
  double w = 0.0;
  double dh = 0.0;
  double dw = 0.0;
};

/// Footprints in voxels (along h, along w, height).
inline constexpr std::int64_t kVehicleLength = 10, kVehicleWidth = 5, kVehicleHeight = 3;
inline constexpr std::int64_t kPedestrianLength = 1, kPedestrianWidth = 1, kPedestrianHeight = 4;

struct SceneConfig {
  GridDims dims{};
  std::uint32_t num_classes = kDefaultNumClasses;
  double voxel_size = 0.4;
  std::uint32_t frame_dt_ms = 500;

  /// Randomly spawned agents (on top of `agents`).
  int num_vehicles = 3;
  int num_pedestrians = 2;
  std::vector<AgentSpec> agents;
  std::vector<double> vehicle_speeds{0.0, 1.6, 3.2, 4.8, 6.4};  // m/s, drawn per random vehicle
  std::vector<double> pedestrian_speeds{0.0, 0.8, 1.6};

  EgoProfile profile = EgoProfile::kConstantVelocity;
  double ego_speed = 0.0;          // m/s along the heading
  double turn_rate = 0.2;          // rad/s, sign picks the direction (kTurn)
  double lane_change_offset = 3.5; // m to the left, negative for right (kLaneChange)

  /// Road, sidewalks and building blocks; off gives an empty (all free) world.
  bool static_layout = true;

  std::uint64_t seed = 0;

  /// Throws ConfigError on unusable dimensions, counts or classes.
  void validate() const;
};

/// Renders `num_frames` frames of a procedural street scene. Static layout is
/// fixed in the world frame; agents keep piecewise-constant velocities and
/// bounce off the grid boundary; each frame is labeled in the ego frame of its
/// own timestamp. Pure function of (config, num_frames).
OccSequence generate_synthetic_world(const SceneConfig& config, std::int64_t num_frames);

/// Distribution over scenes used when building datasets.
struct ScenarioMix {
  double p_lane_change = 0.15;
  double p_turn = 0.15;
  std::vector<double> ego_speeds{0.0, 3.2, 6.4};
  int max_vehicles = 6;
  int max_pedestrians = 4;
};

/// Deterministic scene configuration for dataset member `seed`.
SceneConfig sample_scene_config(std::uint64_t seed, GridDims dims, const ScenarioMix& mix = {});

}  // namespace occworld
