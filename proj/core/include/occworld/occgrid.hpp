#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace occworld {

/// Voxel counts along the forward (h), left (w) and up (d) axes.
struct GridDims {
  std::int64_t h = 64;
  std::int64_t w = 64;
  std::int64_t d = 8;

  std::int64_t voxels() const { return h * w * d; }
  bool operator==(const GridDims&) const = default;
};

/// Default semantic classes of the synthetic world. Label 0 is always free space.
enum Semantic : std::uint8_t {
  kFree = 0,
  kDrivable = 1,
  kSidewalk = 2,
  kBuilding = 3,
  kVehicle = 4,
  kPedestrian = 5,
};
inline constexpr std::uint32_t kDefaultNumClasses = 6;

/// Dense H x W x D grid of class ids, stored at index (h*W + w)*D + d.
/// The ego vehicle sits at cell (H/2, W/2); h points forward, w left, d up.
class OccGrid {
 public:
  OccGrid() = default;
  /// All-free grid.
  OccGrid(GridDims dims, std::uint32_t num_classes, double voxel_size = 0.4);
  /// Validates every label against num_classes.
  OccGrid(GridDims dims, std::uint32_t num_classes, std::vector<std::uint8_t> labels, double voxel_size = 0.4);

  const GridDims& dims() const { return dims_; }
  std::uint32_t num_classes() const { return num_classes_; }
  double voxel_size() const { return voxel_size_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<std::uint8_t> mutable_labels() { return labels_; }

  std::int64_t index(std::int64_t h, std::int64_t w, std::int64_t d) const { return (h * dims_.w + w) * dims_.d + d; }
  std::uint8_t at(std::int64_t h, std::int64_t w, std::int64_t d) const { return labels_[index(h, w, d)]; }
  void set(std::int64_t h, std::int64_t w, std::int64_t d, std::uint8_t label);

  /// Fraction of voxels with a non-free label.
  double occupancy_fraction() const;

  bool operator==(const OccGrid& o) const {
    return dims_ == o.dims_ && num_classes_ == o.num_classes_ && labels_ == o.labels_;
  }

 private:
  GridDims dims_{};
  std::uint32_t num_classes_ = kDefaultNumClasses;
  double voxel_size_ = 0.4;
  std::vector<std::uint8_t> labels_;
};

/// Ego pose in the world frame (the ego frame at t = 0): x forward, y left,
/// yaw counter-clockwise in [-pi, pi). Stored as f32, matching the file format.
struct EgoPose {
  float x = 0.0f;
  float y = 0.0f;
  float yaw = 0.0f;

  bool operator==(const EgoPose&) const = default;
};

struct OccFrame {
  OccGrid grid;
  EgoPose pose;

  bool operator==(const OccFrame&) const = default;
};

/// Frames of one scene, each labeled in the ego frame of its own timestamp.
struct OccSequence {
  std::vector<OccFrame> frames;
  std::uint32_t frame_dt_ms = 500;
  // Metadata; not part of the .occseq payload (datasets keep it in their manifest).
  std::string scene_id;
  std::uint64_t seed = 0;

  double frame_dt() const { return frame_dt_ms / 1000.0; }
  /// Validates the sequence invariants (>= 1 frame, shared dims/classes, dt > 0).
  void validate() const;
  /// Compares the serialized fields (frames and frame_dt_ms).
  bool same_payload(const OccSequence& o) const { return frame_dt_ms == o.frame_dt_ms && frames == o.frames; }
};

/// `.occseq`, little-endian: "OCCS", u32 version=1, u32 H, W, D, num_classes,
/// num_frames, frame_dt_ms; then per frame 3 x f32 pose (x, y, yaw) and
/// H*W*D label bytes.
inline constexpr std::uint32_t kOccSeqVersion = 1;
inline constexpr std::size_t kOccSeqHeaderBytes = 32;

void save_sequence(const OccSequence& seq, std::ostream& sink);
void save_sequence(const OccSequence& seq, const std::filesystem::path& path);
OccSequence load_sequence(std::istream& source);
OccSequence load_sequence(const std::filesystem::path& path);

}  // namespace occworld
