#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occworld/occgrid.hpp"
#include "occworld/trajectory.hpp"

namespace occworld::eval {

/// Binary occupancy IoU (label != 0), in [0, 1]; 1 when both grids are empty.
double iou_binary(const OccGrid& pred, const OccGrid& gt);

struct ClassIou {
  std::uint32_t cls = 0;
  std::int64_t intersection = 0;
  std::int64_t union_ = 0;
  bool in_gt = false;
  double iou() const { return union_ > 0 ? static_cast<double>(intersection) / static_cast<double>(union_) : 0.0; }
};

struct SemanticIou {
  double miou = 0.0;  // in [0, 1]
  std::vector<ClassIou> per_class;  // one row per non-free class
};

/// Which classes enter the mean. By default every non-free class that occurs
/// in the ground truth; a non-empty `classes` restricts further.
struct ClassFilter {
  std::vector<std::uint32_t> classes;
};

/// Per-class voxel IoU averaged over the non-free classes present in gt.
/// A gt without any non-free voxel scores 1 if pred is empty too, else 0.
SemanticIou miou_semantic(const OccGrid& pred, const OccGrid& gt, const ClassFilter& filter = {});

/// Accumulates intersections and unions over many grid pairs, so set-level
/// scores weight every voxel equally (classes present anywhere in the gt set).
class IouAccumulator {
 public:
  explicit IouAccumulator(std::uint32_t num_classes = kDefaultNumClasses);
  void add(const OccGrid& pred, const OccGrid& gt);
  double iou() const;
  SemanticIou miou(const ClassFilter& filter = {}) const;
  std::int64_t pairs() const { return pairs_; }

 private:
  std::uint32_t num_classes_;
  std::vector<std::int64_t> inter_, pred_count_, gt_count_;
  std::int64_t occ_inter_ = 0, occ_union_ = 0, pairs_ = 0;
};

enum class L2Mode { kAtHorizon, kAveragedUpToHorizon };

/// Distance between waypoints at each 1-based horizon frame, or the mean of
/// those distances over frames 1..horizon.
std::vector<double> l2_error(const Trajectory& pred, const Trajectory& gt, std::span<const int> horizons, L2Mode mode);

struct CollisionParams {
  double length = 4.0;  // m along the heading
  double width = 2.0;   // m
  double max_height = 2.0;  // layers whose bottom lies below this are checked
  std::vector<std::uint8_t> obstacle_classes{kBuilding, kVehicle, kPedestrian};
};

/// Per-frame collision flags for one predicted trajectory against the ground
/// truth future. Frame k's footprint is centred on waypoint k and oriented
/// along the segment to waypoint k+1; the last one is axis-aligned. The footprint
/// is moved into the ego frame of gt frame k using the gt trajectory, and a
/// voxel counts as hit when the closed footprint rectangle and the closed
/// voxel square intersect.
std::vector<bool> collisions(const Trajectory& pred, const Trajectory& gt, std::span<const OccGrid> gt_future,
                             const CollisionParams& params = {});

/// Percentage of samples colliding at any frame <= horizon.
std::vector<double> collision_rate(std::span<const std::vector<bool>> per_sample, std::span<const int> horizons);

/// Repeats the last history grid `steps` times.
std::vector<OccGrid> copy_paste_baseline(std::span<const OccGrid> history, int steps);

}  // namespace occworld::eval
