#include "occworld/tokenizer/tokenizer.hpp"

#include <algorithm>
#include <limits>

#include "occworld/errors.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/tokenizer/lovasz.hpp"

namespace occworld::tok {

namespace {

int stages_for(int d) {
  switch (d) {
    case 2: return 1;
    case 4: return 2;
    case 8: return 3;
    default: throw ConfigError("tokenizer.d must be 2, 4 or 8 (got " + std::to_string(d) + ")");
  }
}


Tensor squared_norm_mean(const Tensor& diff, std::int64_t sites) {
  return nn::scale(nn::sum(nn::mul(diff, diff)), 1.0 / static_cast<double>(sites));
}

}  // namespace

void TokenizerConfig::validate() const {
  stages_for(d);
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ConfigError("tokenizer: grid extents must be >= 1");
  if (dims.h % d != 0 || dims.w % d != 0) {
    throw ShapeError("tokenizer: grid " + std::to_string(dims.h) + "x" + std::to_string(dims.w) +
                     " not divisible by d=" + std::to_string(d));
  }
  if (N < 1) throw ConfigError("tokenizer: empty codebook");
  if (N < 2) throw ConfigError("tokenizer.N must be >= 2");
  if (C < 1 || Cprime < 1 || width < 1) throw ConfigError("tokenizer: C, Cprime and width must be >= 1");
  if (num_classes < 2 || num_classes > 256) throw ConfigError("tokenizer: num_classes must be in [2, 256]");
  if (lambda1 < 0 || beta < 0) throw ConfigError("tokenizer: lambda1 and beta must be >= 0");
}

Tensor embed_bev(const OccGrid& grid, const Tensor& table) {
  const OccGrid* one = &grid;
  auto out = embed_bev(std::span<const OccGrid* const>(&one, 1), table);
  return nn::reshape(out, {grid.dims().h, grid.dims().w, -1});
}

Tensor embed_bev(std::span<const OccGrid* const> grids, const Tensor& table) {
  if (grids.empty()) throw ShapeError("embed_bev: no grids");
  if (table.rank() != 2) throw ShapeError("embed_bev: table must be [classes, C'], got " + nn::shape_str(table.shape()));
  const auto dims = grids[0]->dims();
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(dims.voxels()) * grids.size());
  for (const auto* g : grids) {
    if (!(g->dims() == dims)) throw ShapeError("embed_bev: grids disagree on dims");
    if (static_cast<std::int64_t>(g->num_classes()) != table.dim(0)) {
      throw ShapeError("embed_bev: grid has " + std::to_string(g->num_classes()) + " classes, table " +
                       nn::shape_str(table.shape()));
    }
    for (auto l : g->labels()) idx.push_back(l);
  }
  auto rows = nn::embedding(table, idx);
  return nn::reshape(rows, {static_cast<std::int64_t>(grids.size()), dims.h, dims.w, dims.d * table.dim(1)});
}

std::int64_t nearest_code(std::span<const double> v, const Tensor& codebook) {
  const std::int64_t N = codebook.dim(0), C = codebook.dim(1);
  const auto cb = codebook.data();
  std::int64_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k < N; ++k) {
    double dist = 0.0;
    const double* row = cb.data() + k * C;
    for (std::int64_t c = 0; c < C; ++c) {
      const double diff = v[static_cast<std::size_t>(c)] - row[c];
      dist += diff * diff;
    }
    if (dist < best_d) {
      best_d = dist;
      best = k;
    }
  }
  return best;
}

TokenMap quantize(const Tensor& latent, const Tensor& codebook) {
  if (!codebook.defined() || codebook.rank() != 2 || codebook.dim(0) == 0) {
    throw ConfigError("quantize: empty codebook");
  }
  if (latent.rank() != 4 || latent.dim(3) != codebook.dim(1)) {
    throw ShapeError("quantize: latent " + nn::shape_str(latent.shape()) + " vs codebook " +
                     nn::shape_str(codebook.shape()));
  }
  TokenMap t;
  t.batch = latent.dim(0);
  t.h = latent.dim(1);
  t.w = latent.dim(2);
  const std::int64_t C = latent.dim(3), sites = t.batch * t.h * t.w;
  t.indices.resize(static_cast<std::size_t>(sites));
  const auto z = latent.data();
  for (std::int64_t s = 0; s < sites; ++s) {
    t.indices[static_cast<std::size_t>(s)] = nearest_code(z.subspan(static_cast<std::size_t>(s * C), static_cast<std::size_t>(C)), codebook);
  }
  t.quantized = nn::reshape(nn::embedding(codebook, t.indices), latent.shape());
  t.passthrough = nn::straight_through(latent, t.quantized);
  return t;
}

Tensor tokenizer_loss(const Tensor& logits, std::span<const OccGrid* const> targets, const Tensor& latent,
                      const TokenMap& tokens, double lambda1, double beta, LossBreakdown* breakdown) {
  if (logits.rank() != 5 || static_cast<std::size_t>(logits.dim(0)) != targets.size()) {
    throw ShapeError("tokenizer_loss: logits " + nn::shape_str(logits.shape()) + " for " +
                     std::to_string(targets.size()) + " targets");
  }
  const std::int64_t K = logits.dim(4);
  std::vector<std::uint8_t> labels;
  labels.reserve(static_cast<std::size_t>(logits.numel() / K));
  for (const auto* g : targets) {
    const auto& dm = g->dims();
    if (dm.h != logits.dim(1) || dm.w != logits.dim(2) || dm.d != logits.dim(3)) {
      throw ShapeError("tokenizer_loss: target dims do not match logits " + nn::shape_str(logits.shape()));
    }
    labels.insert(labels.end(), g->labels().begin(), g->labels().end());
  }
  std::vector<std::int32_t> ce_targets(labels.begin(), labels.end());
  auto flat = nn::reshape(logits, {-1, K});
  auto ce = nn::cross_entropy(flat, ce_targets);
  auto lov = nn::scale(lovasz_softmax(nn::softmax(flat), labels), lambda1);
  const std::int64_t sites = tokens.batch * tokens.h * tokens.w;
  auto cb = squared_norm_mean(nn::sub(latent.detach(), tokens.quantized), sites);
  auto commit = nn::scale(squared_norm_mean(nn::sub(latent, tokens.quantized.detach()), sites), beta);
  auto total = nn::add(nn::add(ce, lov), nn::add(cb, commit));
  if (breakdown) {
    *breakdown = {ce.item(), lov.item(), cb.item(), commit.item(), total.item()};
  }
  return total;
}

Tokenizer::Tokenizer(const TokenizerConfig& config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  const auto encoder_width = [&](int stage) { return std::min(config_.width << stage, 2 * config_.width); };
  using nn::Init;
  const int S = stages_for(config_.d);
  class_table_ = params_.add("tokenizer.class_embedding", {config_.num_classes, config_.Cprime}, Init::kUniformFanIn, 1.0);
  std::int64_t in = config_.dims.d * config_.Cprime;
  for (int i = 0; i < S; ++i) {
    const auto out = encoder_width(i);
    const auto name = "tokenizer.encoder.conv" + std::to_string(i);
    enc_convs_.emplace_back(params_, name, in, out, 3, 2, 1);
    enc_norms_.emplace_back(params_, "tokenizer.encoder.norm" + std::to_string(i), out);
    in = out;
  }
  enc_proj_ = nn::Conv2d(params_, "tokenizer.encoder.proj", in, config_.C, 1, 1, 0);
  codebook_ = params_.add("tokenizer.codebook", {config_.N, config_.C}, Init::kUniformFanIn, static_cast<double>(config_.C));
  in = config_.C;
  for (int j = 0; j < S; ++j) {
    const int mirror = S - 2 - j;
    const auto out = mirror >= 0 ? encoder_width(mirror) : config_.width;
    dec_convs_.emplace_back(params_, "tokenizer.decoder.deconv" + std::to_string(j), in, out, 4, 2, 1);
    dec_norms_.emplace_back(params_, "tokenizer.decoder.norm" + std::to_string(j), out);
    in = out;
  }
  dec_head_ = nn::Conv2d(params_, "tokenizer.decoder.head", in, config_.dims.d * config_.num_classes, 1, 1, 0);
}

Tensor Tokenizer::encode(const Tensor& bev) const {
  if (bev.rank() != 4 || bev.dim(1) % config_.d != 0 || bev.dim(2) % config_.d != 0) {
    throw ShapeError("encode: input " + nn::shape_str(bev.shape()) + " not divisible by d=" + std::to_string(config_.d));
  }
  Tensor x = bev;
  for (std::size_t i = 0; i < enc_convs_.size(); ++i) x = nn::gelu(enc_norms_[i](enc_convs_[i](x)));
  return enc_proj_(x);
}

Tensor Tokenizer::decode(const Tensor& tokens) const {
  if (tokens.rank() != 4 || tokens.dim(3) != config_.C) {
    throw ShapeError("decode: tokens " + nn::shape_str(tokens.shape()) + " need " + std::to_string(config_.C) + " channels");
  }
  Tensor x = tokens;
  for (std::size_t j = 0; j < dec_convs_.size(); ++j) x = nn::gelu(dec_norms_[j](dec_convs_[j](x)));
  x = dec_head_(x);
  return nn::reshape(x, {x.dim(0), x.dim(1), x.dim(2), config_.dims.d, static_cast<std::int64_t>(config_.num_classes)});
}

Tensor Tokenizer::lookup(std::span<const std::int64_t> indices, std::int64_t batch) const {
  const auto h = config_.token_h(), w = config_.token_w();
  if (static_cast<std::int64_t>(indices.size()) != batch * h * w) {
    throw ShapeError("lookup: " + std::to_string(indices.size()) + " indices for batch " + std::to_string(batch));
  }
  return nn::reshape(nn::embedding(codebook_, indices), {batch, h, w, config_.C});
}

std::vector<std::int64_t> Tokenizer::tokenize(std::span<const OccGrid* const> grids) const {
  nn::NoGradGuard guard;
  return quantize(encode(embed(grids))).indices;
}

std::vector<OccGrid> Tokenizer::logits_to_grids(const Tensor& logits) const {
  const std::int64_t B = logits.dim(0), K = logits.dim(4);
  const std::int64_t voxels = logits.dim(1) * logits.dim(2) * logits.dim(3);
  const GridDims dims{logits.dim(1), logits.dim(2), logits.dim(3)};
  std::vector<OccGrid> out;
  const auto v = logits.data();
  for (std::int64_t b = 0; b < B; ++b) {
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(voxels));
    for (std::int64_t i = 0; i < voxels; ++i) {
      const double* row = v.data() + (b * voxels + i) * K;
      labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::max_element(row, row + K) - row);
    }
    out.emplace_back(dims, config_.num_classes, std::move(labels), config_.voxel_size);
  }
  return out;
}

std::vector<OccGrid> Tokenizer::reconstruct(std::span<const OccGrid* const> grids) const {
  nn::NoGradGuard guard;
  return logits_to_grids(decode(quantize(encode(embed(grids))).quantized));
}

std::vector<OccGrid> Tokenizer::decode_indices(std::span<const std::int64_t> indices, std::int64_t batch) const {
  nn::NoGradGuard guard;
  return logits_to_grids(decode(lookup(indices, batch)));
}

}  // namespace occworld::tok
