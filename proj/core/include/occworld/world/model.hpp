#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occworld/numerics/layers.hpp"
#include "occworld/occgrid.hpp"
#include "occworld/trajectory.hpp"

namespace occworld::world {

using nn::Tensor;

struct WorldConfig {
  std::int64_t token_h = 16;  // base token grid, from the tokenizer
  std::int64_t token_w = 16;
  std::int64_t C = 128;  // code width
  std::int64_t N = 512;  // codebook size
  std::int64_t width = 128;  // model width; the code embeddings are projected C -> width
  int K = 2;  // number of merges, so K + 1 scales
  int layers_per_scale = 6;
  int heads = 4;
  int ego_spatial_layers = 2;
  int ego_temporal_layers = 2;
  std::int64_t mlp_ratio = 2;
  int history_frames = 5;  // t + 1
  int future_frames = 6;
  /// Length of the temporal position tables; 0 means history + future.
  int max_frames = 0;
  double lambda2 = 1.0;
  /// Ablation switches. Without spatial mixing there is no spatial aggregation
  /// at all: no mixing blocks, no coarser scales and no fuse convolutions, so
  /// temporal attention runs directly on the base tokens. Without temporal
  /// attention every site only sees its own current token.
  bool spatial_mixing = true;
  bool temporal_attention = true;

  void validate() const;
  int capacity() const { return max_frames > 0 ? max_frames : history_frames + future_frames; }
  int num_scales() const { return spatial_mixing ? K + 1 : 1; }
  std::int64_t scale_h(int i) const { return token_h >> i; }
  std::int64_t scale_w(int i) const { return token_w >> i; }
};

/// Multi-scale token grids for B windows of T frames, flattened frame-major:
/// scales[i] is [B*T, h_i, w_i, width], ego is [B*T, width].
struct Pyramid {
  std::int64_t batch = 0, frames = 0;
  std::vector<Tensor> scales;
  Tensor ego;
};

struct WorldOutput {
  Tensor logits;        // [B*T, h*w, N]; row (b*T + tau) predicts frame tau + 1
  Tensor displacement;  // [B*T, 2], meters in the ego frame at tau
};

/// Ego-motion inputs for a window: entry k is the motion of frame k seen from
/// frame k-1, and entry 0 is always zero.
std::vector<PoseDelta> ego_motion_inputs(std::span<const EgoPose> poses);

/// Stacks (dx, dy, dyaw) rows into a [n, 3] tensor.
Tensor motion_tensor(std::span<const PoseDelta> motion);

/// Additive [T, T] attention bias: 0 where key <= query, -inf after it. With
/// `diagonal_only` a position sees nothing but itself.
Tensor causal_bias(std::int64_t frames, bool diagonal_only = false);

/// Concatenates each 2x2 window and projects it: [B, h, w, W] -> [B, h/2, w/2, W].
Tensor merge_tokens(const Tensor& x, const nn::Linear& proj);

/// Spatial-temporal generative transformer over tokenized scenes.
class WorldModel {
 public:
  explicit WorldModel(const WorldConfig& config, std::uint64_t seed = 0);

  const WorldConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// motion [n, 3] -> ego tokens [n, width].
  Tensor embed_ego(const Tensor& motion) const;
  /// scene [B*T, h, w, C] code embeddings, ego [B*T, width].
  Pyramid build_pyramid(const Tensor& scene, const Tensor& ego, std::int64_t batch, std::int64_t frames) const;
  /// Per-site causal attention over time at every scale, ego included.
  /// Position tau of the result is the prediction for frame tau + 1.
  Pyramid temporal_forecast(const Pyramid& pyramid) const;
  /// Coarse-to-fine fusion; returns base-scale tokens [B*T, h, w, width].
  /// The ego token is left as is (pyramid.ego).
  Tensor unet_fuse(const Pyramid& pyramid) const;
  /// fused [B*T, h, w, width] -> logits [B*T, h*w, N].
  Tensor classify_codes(const Tensor& fused) const;
  /// ego [n, width] -> displacement [n, 2].
  Tensor ego_decode(const Tensor& ego) const;

  /// scene [B*T, h, w, C], motion [B*T, 3].
  WorldOutput forward(const Tensor& scene, const Tensor& motion, std::int64_t batch, std::int64_t frames) const;

 private:
  struct Scale {
    Tensor pos;             // [h*w, width]
    Tensor temporal_pos;    // [capacity, width]
    nn::Linear merge;       // 4*width -> width, scales >= 1
    nn::TransformerBlock mix_pre, mix_post;
    std::vector<nn::TransformerBlock> temporal;
    std::vector<nn::TransformerBlock> ego_cross;
    nn::Conv2d fuse;        // applied after upsampling scale i into scale i-1
  };

  Tensor mix(const nn::TransformerBlock& block, const Tensor& x) const;

  WorldConfig config_;
  nn::ParameterSet params_;
  nn::Linear in_proj_;
  std::vector<Scale> scales_;
  nn::Mlp ego_embed_;
  Tensor ego_temporal_pos_;
  std::vector<nn::TransformerBlock> ego_temporal_;
  nn::TransformerBlock final_mix_;
  nn::LayerNorm head_norm_;
  nn::Linear head_;
  nn::LayerNorm ego_norm_;
  nn::Mlp ego_decoder_;
};

}  // namespace occworld::world
