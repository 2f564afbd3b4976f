#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "occworld/tokenizer/tokenizer.hpp"
#include "occworld/trajectory.hpp"
#include "occworld/world/model.hpp"

namespace occworld::world {

/// Next-token rule: argmax when temperature is 0, otherwise sampling from
/// softmax(logits / temperature) with a stream seeded by `seed`.
struct Decoding {
  double temperature = 0.0;
  std::uint64_t seed = 0;

  /// "argmax" or "sample:<temperature>"; ConfigError otherwise.
  static Decoding parse(const std::string& text, std::uint64_t seed = 0);
  std::string str() const;
};

struct RolloutResult {
  std::vector<OccGrid> grids;
  Trajectory trajectory;
  std::vector<std::vector<std::int64_t>> indices;  // predicted codes per step
};

/// Autoregressive forecast from exactly history_frames frames. Each step
/// predicts the next codes and ego displacement from the last
/// history_frames frames of context, then appends the prediction (as code
/// embeddings) and drops the oldest frame.
RolloutResult rollout(const WorldModel& model, const tok::Tokenizer& tokenizer, std::span<const OccFrame> history,
                      int steps, const Decoding& decoding = {});

/// Same, starting from already tokenized frames.
RolloutResult rollout_tokens(const WorldModel& model, const tok::Tokenizer& tokenizer,
                             std::span<const std::vector<std::int64_t>> history, std::span<const EgoPose> poses,
                             int steps, const Decoding& decoding = {});

}  // namespace occworld::world
