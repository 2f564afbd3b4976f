#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "occworld/numerics/layers.hpp"
#include "occworld/occgrid.hpp"

namespace occworld::tok {

using nn::Tensor;

struct TokenizerConfig {
  GridDims dims{};
  std::uint32_t num_classes = kDefaultNumClasses;
  double voxel_size = 0.4;  // carried onto decoded grids
  int d = 4;             // spatial downsample factor: 2, 4 or 8
  std::int64_t C = 128;  // latent / code width
  std::int64_t N = 512;  // codebook size
  std::int64_t Cprime = 8;  // class embedding width
  std::int64_t width = 64;  // first encoder stage; later stages double up to 2*width
  double lambda1 = 1.0;  // Lovasz weight
  double beta = 0.25;    // commitment weight

  /// Throws ConfigError/ShapeError when dims are not divisible by d etc.
  void validate() const;
  std::int64_t token_h() const { return dims.h / d; }
  std::int64_t token_w() const { return dims.w / d; }
};

/// Quantized latent grid. `indices` is row-major over [B, h, w]. `quantized`
/// holds the selected code rows (its graph reaches the codebook); `passthrough`
/// has the same values but routes gradients to the encoder output.
struct TokenMap {
  std::int64_t batch = 0, h = 0, w = 0;
  std::vector<std::int64_t> indices;
  Tensor quantized;
  Tensor passthrough;
};

/// Per-voxel class embeddings stacked along height: grid -> [H, W, D*C'].
/// Batched form stacks grids into [B, H, W, D*C'].
Tensor embed_bev(const OccGrid& grid, const Tensor& table);
Tensor embed_bev(std::span<const OccGrid* const> grids, const Tensor& table);

/// Nearest code per site (squared L2, lowest index on ties).
/// latent [B, h, w, C], codebook [N, C].
TokenMap quantize(const Tensor& latent, const Tensor& codebook);

/// Index of the nearest code to one vector; the exhaustive scan quantize uses.
std::int64_t nearest_code(std::span<const double> v, const Tensor& codebook);

struct LossBreakdown {
  double cross_entropy = 0.0;
  double lovasz = 0.0;  // already multiplied by lambda1
  double codebook = 0.0;
  double commitment = 0.0;  // already multiplied by beta
  double total = 0.0;
};

/// L_ce + lambda1 * L_lovasz + |sg(latent) - q|^2 + beta * |latent - sg(q)|^2,
/// the last two as per-site squared norms averaged over sites.
/// logits [B, H, W, D, K]; targets supply the labels in the same order.
Tensor tokenizer_loss(const Tensor& logits, std::span<const OccGrid* const> targets, const Tensor& latent,
                      const TokenMap& tokens, double lambda1, double beta, LossBreakdown* breakdown = nullptr);

/// Encoder, codebook and decoder with their parameters, registered under
/// "tokenizer.*".
class Tokenizer {
 public:
  explicit Tokenizer(const TokenizerConfig& config, std::uint64_t seed = 0);

  const TokenizerConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const Tensor& class_table() const { return class_table_; }
  const Tensor& codebook() const { return codebook_; }

  Tensor embed(std::span<const OccGrid* const> grids) const { return embed_bev(grids, class_table_); }
  /// bev [B, H, W, D*C'] -> latent [B, H/d, W/d, C].
  Tensor encode(const Tensor& bev) const;
  TokenMap quantize(const Tensor& latent) const { return tok::quantize(latent, codebook_); }
  /// tokens [B, h, w, C] -> logits [B, H, W, D, K].
  Tensor decode(const Tensor& tokens) const;

  /// Code rows for given indices, shaped [B, h, w, C].
  Tensor lookup(std::span<const std::int64_t> indices, std::int64_t batch) const;
  /// Tokenizes grids (no graph).
  std::vector<std::int64_t> tokenize(std::span<const OccGrid* const> grids) const;
  /// Per-voxel argmax of decoded logits, one grid per batch entry.
  std::vector<OccGrid> logits_to_grids(const Tensor& logits) const;
  /// encode -> quantize -> decode -> argmax, without graph.
  std::vector<OccGrid> reconstruct(std::span<const OccGrid* const> grids) const;
  std::vector<OccGrid> decode_indices(std::span<const std::int64_t> indices, std::int64_t batch) const;

 private:
  TokenizerConfig config_;
  nn::ParameterSet params_;
  Tensor class_table_, codebook_;
  std::vector<nn::Conv2d> enc_convs_;
  std::vector<nn::LayerNorm> enc_norms_;
  nn::Conv2d enc_proj_;
  std::vector<nn::ConvTranspose2d> dec_convs_;
  std::vector<nn::LayerNorm> dec_norms_;
  nn::Conv2d dec_head_;
};

}  // namespace occworld::tok
