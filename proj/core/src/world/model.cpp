#include "occworld/world/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "occworld/errors.hpp"
#include "occworld/numerics/ops.hpp"

namespace occworld::world {

using namespace nn;

void WorldConfig::validate() const {
  if (K < 0 || K > 8) throw ConfigError("world.K must be in [0, 8], got " + std::to_string(K));
  if (token_h < 1 || token_w < 1) throw ConfigError("world: empty base token grid");
  const std::int64_t m = std::int64_t{1} << K;
  if (token_h % m != 0 || token_w % m != 0) {
    throw ShapeError("world: base extents " + std::to_string(token_h) + "x" + std::to_string(token_w) +
                     " not divisible by 2^K = " + std::to_string(m));
  }
  if (C < 1 || N < 1 || width < 1 || mlp_ratio < 1) throw ConfigError("world: C, N, width and mlp_ratio must be >= 1");
  if (heads < 1 || width % heads != 0) {
    throw ConfigError("world.heads = " + std::to_string(heads) + " does not divide width " + std::to_string(width));
  }
  if (layers_per_scale < 1) throw ConfigError("world.layers_per_scale must be >= 1");
  if (ego_spatial_layers < 0 || ego_temporal_layers < 0) throw ConfigError("world: negative ego layer count");
  if (history_frames < 1 || future_frames < 1) throw ConfigError("world: history and future frames must be >= 1");
  if (max_frames != 0 && max_frames < history_frames + future_frames) {
    throw ConfigError("world.max_frames " + std::to_string(max_frames) + " < history + future = " +
                      std::to_string(history_frames + future_frames));
  }
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("world.lambda2 must be finite and >= 0");
}

std::vector<PoseDelta> ego_motion_inputs(std::span<const EgoPose> poses) {
  std::vector<PoseDelta> out(poses.size());
  for (std::size_t k = 1; k < poses.size(); ++k) out[k] = relative_motion(poses[k - 1], poses[k]);
  return out;
}

Tensor motion_tensor(std::span<const PoseDelta> motion) {
  std::vector<double> v;
  v.reserve(motion.size() * 3);
  for (const auto& m : motion) {
    v.push_back(m.dx);
    v.push_back(m.dy);
    v.push_back(m.dyaw);
  }
  return Tensor({static_cast<std::int64_t>(motion.size()), 3}, std::move(v));
}

Tensor causal_bias(std::int64_t frames, bool diagonal_only) {
  Tensor b({frames, frames});
  auto d = b.data();
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::int64_t q = 0; q < frames; ++q) {
    for (std::int64_t k = 0; k < frames; ++k) {
      const bool visible = diagonal_only ? k == q : k <= q;
      d[static_cast<std::size_t>(q * frames + k)] = visible ? 0.0 : ninf;
    }
  }
  return b;
}

Tensor merge_tokens(const Tensor& x, const Linear& proj) { return proj(space_to_depth2(x)); }

WorldModel::WorldModel(const WorldConfig& config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  const auto W = config_.width;
  const auto hidden = config_.mlp_ratio * W;
  const int cap = config_.capacity();
  const double wd = static_cast<double>(W);
  in_proj_ = Linear(params_, "world.in_proj", config_.C, W);
  ego_embed_ = Mlp(params_, "world.ego.embed", 3, W, W);
  for (int i = 0; i < config_.num_scales(); ++i) {
    const std::string p = "world.scale" + std::to_string(i);
    Scale s;
    s.pos = params_.add(p + ".pos", {config_.scale_h(i) * config_.scale_w(i), W}, Init::kUniformFanIn, wd);
    s.temporal_pos = params_.add(p + ".temporal_pos", {cap, W}, Init::kUniformFanIn, wd);
    if (i > 0) {
      s.merge = Linear(params_, p + ".merge", 4 * W, W);
      s.fuse = Conv2d(params_, p + ".fuse", W, W, 3, 1, 1);
    }
    if (config_.spatial_mixing) {
      s.mix_pre = TransformerBlock(params_, p + ".mix_pre", W, config_.heads, hidden);
      s.mix_post = TransformerBlock(params_, p + ".mix_post", W, config_.heads, hidden);
    }
    for (int l = 0; l < config_.layers_per_scale; ++l) {
      s.temporal.emplace_back(params_, p + ".temporal" + std::to_string(l), W, config_.heads, hidden);
    }
    for (int l = 0; l < config_.ego_spatial_layers; ++l) {
      s.ego_cross.emplace_back(params_, p + ".ego_cross" + std::to_string(l), W, config_.heads, hidden, true);
    }
    scales_.push_back(std::move(s));
  }
  ego_temporal_pos_ = params_.add("world.ego.temporal_pos", {cap, W}, Init::kUniformFanIn, wd);
  for (int l = 0; l < config_.ego_temporal_layers; ++l) {
    ego_temporal_.emplace_back(params_, "world.ego.temporal" + std::to_string(l), W, config_.heads, hidden);
  }
  if (config_.spatial_mixing) final_mix_ = TransformerBlock(params_, "world.final_mix", W, config_.heads, hidden);
  head_norm_ = LayerNorm(params_, "world.head.norm", W);
  head_ = Linear(params_, "world.head", W, config_.N);
  ego_norm_ = LayerNorm(params_, "world.ego.norm", W);
  ego_decoder_ = Mlp(params_, "world.ego.decoder", W, W, 2);
}

Tensor WorldModel::mix(const TransformerBlock& block, const Tensor& x) const {
  return config_.spatial_mixing ? block(x) : x;
}

Tensor WorldModel::embed_ego(const Tensor& motion) const {
  if (motion.rank() != 2 || motion.dim(1) != 3) throw ShapeError("embed_ego: expected [n, 3], got " + shape_str(motion.shape()));
  return ego_embed_(motion);
}

Pyramid WorldModel::build_pyramid(const Tensor& scene, const Tensor& ego, std::int64_t batch,
                                  std::int64_t frames) const {
  const auto W = config_.width;
  const std::int64_t bt = batch * frames;
  if (scene.rank() != 4 || scene.dim(0) != bt || scene.dim(3) != config_.C) {
    throw ShapeError("build_pyramid: scene " + shape_str(scene.shape()) + " does not match [" + std::to_string(bt) +
                     ", h, w, " + std::to_string(config_.C) + "]");
  }
  const std::int64_t m = std::int64_t{1} << config_.K;
  if (scene.dim(1) % m != 0 || scene.dim(2) % m != 0) {
    throw ShapeError("build_pyramid: extents " + shape_str(scene.shape()) + " not divisible by 2^K");
  }
  if (scene.dim(1) != config_.token_h || scene.dim(2) != config_.token_w) {
    throw ShapeError("build_pyramid: scene " + shape_str(scene.shape()) + " does not match the configured token grid");
  }
  if (ego.rank() != 2 || ego.dim(0) != bt || ego.dim(1) != W) {
    throw ShapeError("build_pyramid: ego " + shape_str(ego.shape()) + " does not match [" + std::to_string(bt) + ", " +
                     std::to_string(W) + "]");
  }
  Pyramid out;
  out.batch = batch;
  out.frames = frames;
  Tensor x = add(in_proj_(scene), reshape(ego, {bt, 1, 1, W}));
  Tensor e = reshape(ego, {bt, 1, W});
  for (int i = 0; i < config_.num_scales(); ++i) {
    const auto& s = scales_[static_cast<std::size_t>(i)];
    if (i > 0) x = merge_tokens(x, s.merge);
    const auto h = x.dim(1), w = x.dim(2);
    Tensor t = add(reshape(x, {bt, h * w, W}), s.pos);
    t = mix(s.mix_pre, t);
    for (const auto& blk : s.ego_cross) e = blk(e, t, Tensor{});
    x = reshape(t, {bt, h, w, W});
    out.scales.push_back(x);
  }
  out.ego = reshape(e, {bt, W});
  return out;
}

Pyramid WorldModel::temporal_forecast(const Pyramid& pyr) const {
  const auto W = config_.width;
  const auto B = pyr.batch, T = pyr.frames;
  if (T < 1) throw ShapeError("temporal_forecast: empty history");
  if (T > config_.capacity()) {
    throw ConfigError("temporal_forecast: " + std::to_string(T) + " frames exceed the position table of " +
                      std::to_string(config_.capacity()));
  }
  if (pyr.scales.size() != scales_.size()) throw ShapeError("temporal_forecast: pyramid has the wrong number of scales");
  const Tensor bias = causal_bias(T, !config_.temporal_attention);
  Pyramid out;
  out.batch = B;
  out.frames = T;
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    const auto& s = scales_[i];
    const Tensor& x = pyr.scales[i];
    const auto h = config_.scale_h(static_cast<int>(i)), w = config_.scale_w(static_cast<int>(i));
    if (x.rank() != 4 || x.dim(0) != B * T || x.dim(1) != h || x.dim(2) != w || x.dim(3) != W) {
      throw ShapeError("temporal_forecast: scale " + std::to_string(i) + " has shape " + shape_str(x.shape()));
    }
    const auto M = h * w;
    // One independent sequence per (window, site).
    Tensor seq = reshape(permute(reshape(x, {B, T, M, W}), {0, 2, 1, 3}), {B * M, T, W});
    seq = add(seq, slice(s.temporal_pos, 0, 0, T));
    for (const auto& blk : s.temporal) seq = blk(seq, bias);
    Tensor y = reshape(permute(reshape(seq, {B, M, T, W}), {0, 2, 1, 3}), {B * T, M, W});
    y = mix(s.mix_post, y);
    out.scales.push_back(reshape(y, {B * T, h, w, W}));
  }
  Tensor e = add(reshape(pyr.ego, {B, T, W}), slice(ego_temporal_pos_, 0, 0, T));
  for (const auto& blk : ego_temporal_) e = blk(e, bias);
  out.ego = reshape(e, {B * T, W});
  return out;
}

Tensor WorldModel::unet_fuse(const Pyramid& pyr) const {
  if (pyr.scales.size() != scales_.size()) throw ShapeError("unet_fuse: pyramid has the wrong number of scales");
  Tensor p = pyr.scales.back();
  for (int i = config_.num_scales() - 2; i >= 0; --i) {
    p = add(pyr.scales[static_cast<std::size_t>(i)], scales_[static_cast<std::size_t>(i + 1)].fuse(upsample_nearest2(p)));
  }
  if (!config_.spatial_mixing) return p;
  const auto bt = p.dim(0), h = p.dim(1), w = p.dim(2);
  return reshape(final_mix_(reshape(p, {bt, h * w, config_.width})), {bt, h, w, config_.width});
}

Tensor WorldModel::classify_codes(const Tensor& fused) const {
  if (fused.rank() != 4 || fused.dim(3) != config_.width) {
    throw ShapeError("classify_codes: expected [n, h, w, " + std::to_string(config_.width) + "], got " +
                     shape_str(fused.shape()));
  }
  return head_(head_norm_(reshape(fused, {fused.dim(0), fused.dim(1) * fused.dim(2), config_.width})));
}

Tensor WorldModel::ego_decode(const Tensor& ego) const { return ego_decoder_(ego_norm_(ego)); }

WorldOutput WorldModel::forward(const Tensor& scene, const Tensor& motion, std::int64_t batch,
                                std::int64_t frames) const {
  const auto pred = temporal_forecast(build_pyramid(scene, embed_ego(motion), batch, frames));
  return {classify_codes(unet_fuse(pred)), ego_decode(pred.ego)};
}

}  // namespace occworld::world
