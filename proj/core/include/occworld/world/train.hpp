#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "occworld/tokenizer/tokenizer.hpp"
#include "occworld/world/model.hpp"

namespace occworld::world {

struct WorldLossBreakdown {
  double cross_entropy = 0.0;
  double ego = 0.0;  // already multiplied by lambda2
  double total = 0.0;
};

/// Mean cross-entropy over all (position, site) rows plus lambda2 times the
/// mean squared displacement error over positions.
/// logits [n, M, N], targets n*M code indices, displacement [n, 2], gt n rows.
Tensor world_loss(const Tensor& logits, std::span<const std::int32_t> targets, const Tensor& displacement,
                  std::span<const Vec2> gt_displacement, double lambda2, WorldLossBreakdown* breakdown = nullptr);

/// Frozen-tokenizer view of one sequence.
struct TokenizedSequence {
  std::vector<std::vector<std::int64_t>> indices;  // per frame, h*w codes
  std::vector<EgoPose> poses;

  std::size_t size() const { return poses.size(); }
};

std::vector<TokenizedSequence> tokenize_sequences(const tok::Tokenizer& tokenizer, std::span<const OccSequence> seqs,
                                                  std::int64_t batch = 8);

struct WindowRef {
  std::size_t sequence = 0;
  std::size_t start = 0;
};

/// Every start that leaves `frames` inputs plus one target frame.
std::vector<WindowRef> enumerate_windows(std::span<const TokenizedSequence> seqs, std::int64_t frames);

/// Teacher-forced batch: inputs are frames [start, start+T), targets are the
/// codes and ego displacements of frames [start+1, start+T].
struct WorldBatch {
  std::int64_t batch = 0, frames = 0;
  Tensor scene;   // [B*T, h, w, C] code embeddings
  Tensor motion;  // [B*T, 3]
  std::vector<std::int32_t> targets;  // B*T*h*w
  std::vector<Vec2> displacement;     // B*T
};

WorldBatch make_batch(const tok::Tokenizer& tokenizer, std::span<const TokenizedSequence> seqs,
                      std::span<const WindowRef> windows, std::int64_t frames);

/// Inputs for one window given explicit codes and poses (no targets).
WorldBatch window_inputs(const tok::Tokenizer& tokenizer, std::span<const std::vector<std::int64_t>> indices,
                         std::span<const EgoPose> poses);

struct WorldTrainConfig {
  std::int64_t steps = 2000;
  std::int64_t batch = 2;
  double lr = 1e-3;
  double lr_min = 0.0;
  double weight_decay = 0.01;
  double clip_norm = 5.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;    // 0 = once per epoch
  std::int64_t eval_windows = 0;  // cap on held-out windows per evaluation (0 = all)
};

struct WorldEvalLine {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  WorldLossBreakdown loss;      // mean since the previous line
  double token_accuracy = 0.0;  // held-out next-frame code accuracy, percent
  double ego_l2 = 0.0;          // held-out mean displacement error, meters
  double miou = 0.0;            // held-out next-frame mIoU against the decoded targets, percent
};

struct TeacherForcedScore {
  double token_accuracy = 0.0;  // percent
  double ego_l2 = 0.0;
  /// Last position of each window: argmax codes and target codes are both
  /// decoded and compared, pooled over windows. Percent.
  double miou = 0.0;
};

TeacherForcedScore evaluate_teacher_forced(const WorldModel& model, const tok::Tokenizer& tokenizer,
                                           std::span<const TokenizedSequence> seqs, std::span<const WindowRef> windows);

/// Stage-2 loop over windows of history_frames teacher-forced frames. The
/// tokenizer is frozen. Throws DivergenceError on a non-finite loss.
std::vector<WorldEvalLine> train_world(WorldModel& model, const tok::Tokenizer& tokenizer,
                                       std::span<const OccSequence> train, std::span<const OccSequence> heldout,
                                       const WorldTrainConfig& config,
                                       const std::function<void(const WorldEvalLine&)>& on_eval = {});

}  // namespace occworld::world
