#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "occworld/rng.hpp"
#include "occworld/tokenizer/tokenizer.hpp"

namespace occworld::tok {

struct TokenizerTrainConfig {
  std::int64_t steps = 2000;
  std::int64_t batch = 4;
  double lr = 1e-3;
  double lr_min = 0.0;
  double weight_decay = 0.01;
  double clip_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  /// Held-out evaluation interval in steps; 0 evaluates once per epoch.
  std::int64_t eval_every = 0;
  /// Caps the held-out frames scored per evaluation (0 = all).
  std::int64_t eval_frames = 0;
  /// Before the first step, seed the codebook with k-means++ picks among
  /// encoder outputs of this many training frames (0 keeps the random init).
  std::int64_t codebook_init_frames = 16;
};

struct TokenizerEvalLine {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;  // mean over the steps since the previous line
  double miou = 0.0;   // held-out reconstruction, percent
  double iou = 0.0;    // percent
  std::int64_t codes_used = 0;
};

struct ReconstructionScore {
  double miou = 0.0;  // percent
  double iou = 0.0;   // percent
  std::int64_t codes_used = 0;
};

/// Reconstruction mIoU/IoU accumulated over all frames, plus the number of
/// distinct codes the frames tokenize to.
ReconstructionScore evaluate_reconstruction(const Tokenizer& model, std::span<const OccGrid> frames,
                                            std::int64_t batch = 8);

/// k-means++ seeding: the first code is a random sample, each further code a
/// sample drawn with probability proportional to its squared distance from
/// the codes chosen so far. Deterministic given `rng`.
void init_codebook_kmeanspp(Tokenizer& model, std::span<const OccGrid* const> frames, Rng& rng);

/// Stage-1 loop: frames are treated independently, shuffled per epoch with
/// a seeded permutation, and fitted with AdamW under cosine annealing.
/// Throws DivergenceError on a non-finite loss.
std::vector<TokenizerEvalLine> train_tokenizer(Tokenizer& model, std::span<const OccGrid> train,
                                               std::span<const OccGrid> heldout, const TokenizerTrainConfig& config,
                                               const std::function<void(const TokenizerEvalLine&)>& on_eval = {});

}  // namespace occworld::tok
