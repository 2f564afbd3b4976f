#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "occworld/numerics/layers.hpp"

namespace occworld::nn {

enum class BlobType { kF64, kF32 };

/// Everything in a checkpoint manifest apart from the parameter shapes.
/// `extra` carries model configuration (keys like "config.tokenizer.d").
struct CheckpointMeta {
  std::string module;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  BlobType dtype = BlobType::kF64;
  std::map<std::string, std::string> extra;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `dir/manifest.txt` (key=value lines) plus one raw little-endian blob
/// `dir/<param name>.bin` per parameter. Creates `dir` if needed.
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params, const CheckpointMeta& meta);

/// Reads only the manifest.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

/// Loads blobs into an already-constructed ParameterSet. Every parameter in
/// `params` must be present with an identical shape; extra or missing
/// entries raise FormatError.
CheckpointMeta load_checkpoint(const std::filesystem::path& dir, const ParameterSet& params);

}  // namespace occworld::nn
