#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "occworld/numerics/checkpoint.hpp"
#include "occworld/tokenizer/tokenizer.hpp"
#include "occworld/world/model.hpp"

namespace occworld {

/// Checkpoints that carry their model configuration in the manifest
/// (`config.*` keys), so a model can be rebuilt from the directory alone.
void save_tokenizer(const std::filesystem::path& dir, const tok::Tokenizer& model, std::uint64_t seed,
                    std::int64_t step);
std::unique_ptr<tok::Tokenizer> load_tokenizer(const std::filesystem::path& dir);

void save_world(const std::filesystem::path& dir, const world::WorldModel& model, std::uint64_t seed,
                std::int64_t step);
std::unique_ptr<world::WorldModel> load_world(const std::filesystem::path& dir);

}  // namespace occworld
