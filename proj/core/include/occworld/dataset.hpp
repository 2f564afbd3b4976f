#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occworld/occgrid.hpp"
#include "occworld/synthetic.hpp"

namespace occworld {

/// train/val/test = 80/10/10 by a hash of the scene seed.
std::string split_for_seed(std::uint64_t seed);

struct DatasetEntry {
  std::string file;
  std::uint64_t seed = 0;
  std::string split;
};

/// A directory of `.occseq` files plus `manifest.txt`.
struct Dataset {
  std::filesystem::path dir;
  GridDims dims{};
  std::uint32_t num_classes = kDefaultNumClasses;
  std::int64_t frames = 0;
  std::uint64_t base_seed = 0;
  std::vector<DatasetEntry> entries;

  std::vector<DatasetEntry> split(const std::string& name) const;
  /// Loads the sequences of one split ("all" for every entry), checking each
  /// against the manifest dims; ValidationError on a mismatch.
  std::vector<OccSequence> load(const std::string& split_name) const;
};

inline constexpr const char* kManifestName = "manifest.txt";

/// Scene i uses seed mix_seed(base_seed, i) and sample_scene_config. Writes
/// the files and the manifest; output is a pure function of the arguments.
Dataset generate_dataset(const std::filesystem::path& dir, std::int64_t scenes, std::int64_t frames,
                         std::uint64_t base_seed, GridDims dims, const ScenarioMix& mix = {});

void write_manifest(const Dataset& dataset);
/// IoError when missing, FormatError when malformed.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace occworld
