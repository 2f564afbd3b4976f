#include "occworld/artifacts.hpp"

#include <cstdio>

#include "occworld/config.hpp"
#include "occworld/errors.hpp"

namespace occworld {

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::string& need(const nn::CheckpointMeta& meta, const std::string& key) {
  const auto it = meta.extra.find(key);
  if (it == meta.extra.end()) throw FormatError("checkpoint manifest lacks " + key);
  return it->second;
}

std::int64_t need_int(const nn::CheckpointMeta& meta, const std::string& key) {
  try {
    return std::stoll(need(meta, key));
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint manifest: bad integer for " + key);
  }
}

double need_double(const nn::CheckpointMeta& meta, const std::string& key) {
  try {
    return std::stod(need(meta, key));
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint manifest: bad number for " + key);
  }
}

void expect_module(const nn::CheckpointMeta& meta, const std::string& module, const std::filesystem::path& dir) {
  if (meta.module != module) {
    throw FormatError(dir.string() + " holds a '" + meta.module + "' checkpoint, expected '" + module + "'");
  }
}

}  // namespace

void save_tokenizer(const std::filesystem::path& dir, const tok::Tokenizer& model, std::uint64_t seed,
                    std::int64_t step) {
  const auto& c = model.config();
  nn::CheckpointMeta meta;
  meta.module = "tokenizer";
  meta.seed = seed;
  meta.step = step;
  meta.extra = {
      {"config.tokenizer.grid", grid_str(c.dims)},
      {"config.tokenizer.classes", std::to_string(c.num_classes)},
      {"config.tokenizer.voxel_size", exact(c.voxel_size)},
      {"config.tokenizer.d", std::to_string(c.d)},
      {"config.tokenizer.C", std::to_string(c.C)},
      {"config.tokenizer.N", std::to_string(c.N)},
      {"config.tokenizer.Cprime", std::to_string(c.Cprime)},
      {"config.tokenizer.width", std::to_string(c.width)},
      {"config.tokenizer.lambda1", exact(c.lambda1)},
      {"config.tokenizer.beta", exact(c.beta)},
  };
  nn::save_checkpoint(dir, model.params(), meta);
}

std::unique_ptr<tok::Tokenizer> load_tokenizer(const std::filesystem::path& dir) {
  const auto meta = nn::read_checkpoint_meta(dir);
  expect_module(meta, "tokenizer", dir);
  tok::TokenizerConfig c;
  try {
    c.dims = parse_grid(need(meta, "config.tokenizer.grid"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  c.num_classes = static_cast<std::uint32_t>(need_int(meta, "config.tokenizer.classes"));
  c.voxel_size = need_double(meta, "config.tokenizer.voxel_size");
  c.d = static_cast<int>(need_int(meta, "config.tokenizer.d"));
  c.C = need_int(meta, "config.tokenizer.C");
  c.N = need_int(meta, "config.tokenizer.N");
  c.Cprime = need_int(meta, "config.tokenizer.Cprime");
  c.width = need_int(meta, "config.tokenizer.width");
  c.lambda1 = need_double(meta, "config.tokenizer.lambda1");
  c.beta = need_double(meta, "config.tokenizer.beta");
  auto model = std::make_unique<tok::Tokenizer>(c, meta.seed);
  nn::load_checkpoint(dir, model->params());
  return model;
}

void save_world(const std::filesystem::path& dir, const world::WorldModel& model, std::uint64_t seed,
                std::int64_t step) {
  const auto& c = model.config();
  nn::CheckpointMeta meta;
  meta.module = "world";
  meta.seed = seed;
  meta.step = step;
  meta.extra = {
      {"config.world.token_h", std::to_string(c.token_h)},
      {"config.world.token_w", std::to_string(c.token_w)},
      {"config.world.C", std::to_string(c.C)},
      {"config.world.N", std::to_string(c.N)},
      {"config.world.width", std::to_string(c.width)},
      {"config.world.K", std::to_string(c.K)},
      {"config.world.layers_per_scale", std::to_string(c.layers_per_scale)},
      {"config.world.heads", std::to_string(c.heads)},
      {"config.world.ego_spatial_layers", std::to_string(c.ego_spatial_layers)},
      {"config.world.ego_temporal_layers", std::to_string(c.ego_temporal_layers)},
      {"config.world.mlp_ratio", std::to_string(c.mlp_ratio)},
      {"config.world.history_frames", std::to_string(c.history_frames)},
      {"config.world.future_frames", std::to_string(c.future_frames)},
      {"config.world.max_frames", std::to_string(c.max_frames)},
      {"config.world.lambda2", exact(c.lambda2)},
      {"config.world.spatial_mixing", c.spatial_mixing ? "true" : "false"},
      {"config.world.temporal_attention", c.temporal_attention ? "true" : "false"},
  };
  nn::save_checkpoint(dir, model.params(), meta);
}

std::unique_ptr<world::WorldModel> load_world(const std::filesystem::path& dir) {
  const auto meta = nn::read_checkpoint_meta(dir);
  expect_module(meta, "world", dir);
  world::WorldConfig c;
  c.token_h = need_int(meta, "config.world.token_h");
  c.token_w = need_int(meta, "config.world.token_w");
  c.C = need_int(meta, "config.world.C");
  c.N = need_int(meta, "config.world.N");
  c.width = need_int(meta, "config.world.width");
  c.K = static_cast<int>(need_int(meta, "config.world.K"));
  c.layers_per_scale = static_cast<int>(need_int(meta, "config.world.layers_per_scale"));
  c.heads = static_cast<int>(need_int(meta, "config.world.heads"));
  c.ego_spatial_layers = static_cast<int>(need_int(meta, "config.world.ego_spatial_layers"));
  c.ego_temporal_layers = static_cast<int>(need_int(meta, "config.world.ego_temporal_layers"));
  c.mlp_ratio = need_int(meta, "config.world.mlp_ratio");
  c.history_frames = static_cast<int>(need_int(meta, "config.world.history_frames"));
  c.future_frames = static_cast<int>(need_int(meta, "config.world.future_frames"));
  c.max_frames = static_cast<int>(need_int(meta, "config.world.max_frames"));
  c.lambda2 = need_double(meta, "config.world.lambda2");
  c.spatial_mixing = need(meta, "config.world.spatial_mixing") == "true";
  c.temporal_attention = need(meta, "config.world.temporal_attention") == "true";
  auto model = std::make_unique<world::WorldModel>(c, meta.seed);
  nn::load_checkpoint(dir, model->params());
  return model;
}

}  // namespace occworld
