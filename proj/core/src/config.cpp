#include "occworld/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "occworld/errors.hpp"

namespace occworld {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc{} && r.ptr == end && !s.empty();
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "off" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

std::vector<double> parse_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_double(trim(item), v)) throw ConfigError(key + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

GridDims parse_grid(std::string_view text) {
  GridDims dims;
  std::int64_t* out[3] = {&dims.h, &dims.w, &dims.d};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto x = text.find('x', start);
    const bool last = i == 2;
    if (last != (x == std::string_view::npos)) {
      throw ConfigError("grid '" + std::string(text) + "' must have the form HxWxD");
    }
    const auto part = text.substr(start, last ? std::string_view::npos : x - start);
    if (!parse_int(part, *out[i]) || *out[i] < 1) {
      throw ConfigError("grid '" + std::string(text) + "': extent '" + std::string(part) + "' is not a positive integer");
    }
    start = x + 1;
  }
  return dims;
}

std::string grid_str(const GridDims& dims) {
  return std::to_string(dims.h) + "x" + std::to_string(dims.w) + "x" + std::to_string(dims.d);
}

const std::map<std::string, std::pair<RunConfig::Kind, std::string>>& RunConfig::schema() {
  using K = Kind;
  static const std::map<std::string, std::pair<Kind, std::string>> s{
      {"run.seed", {K::kUInt, "0"}},
      {"run.deterministic", {K::kBool, "true"}},
      {"run.out_dir", {K::kString, "out"}},
      {"run.threads", {K::kInt, "0"}},

      {"data.grid", {K::kGrid, "64x64x8"}},
      {"data.classes", {K::kInt, "6"}},
      {"data.frames", {K::kInt, "11"}},
      {"data.scenes", {K::kInt, "256"}},
      {"data.p_lane_change", {K::kDouble, "0.15"}},
      {"data.p_turn", {K::kDouble, "0.15"}},
      {"data.ego_speeds", {K::kString, "0,3.2,6.4"}},
      {"data.max_vehicles", {K::kInt, "6"}},
      {"data.max_pedestrians", {K::kInt, "4"}},

      {"tokenizer.d", {K::kInt, "4"}},
      {"tokenizer.C", {K::kInt, "128"}},
      {"tokenizer.N", {K::kInt, "512"}},
      {"tokenizer.Cprime", {K::kInt, "8"}},
      {"tokenizer.width", {K::kInt, "64"}},
      {"tokenizer.lambda1", {K::kDouble, "1"}},
      {"tokenizer.beta", {K::kDouble, "0.25"}},
      {"tokenizer.lr", {K::kDouble, "0.001"}},
      {"tokenizer.lr_min", {K::kDouble, "0"}},
      {"tokenizer.weight_decay", {K::kDouble, "0.01"}},
      {"tokenizer.clip_norm", {K::kDouble, "0"}},
      {"tokenizer.steps", {K::kInt, "2000"}},
      {"tokenizer.batch", {K::kInt, "4"}},
      {"tokenizer.seed", {K::kUInt, "0"}},
      {"tokenizer.eval_every", {K::kInt, "0"}},
      {"tokenizer.eval_frames", {K::kInt, "0"}},
      {"tokenizer.codebook_init_frames", {K::kInt, "16"}},

      {"world.K", {K::kInt, "2"}},
      {"world.layers_per_scale", {K::kInt, "6"}},
      {"world.heads", {K::kInt, "4"}},
      {"world.width", {K::kInt, "128"}},
      {"world.ego_spatial_layers", {K::kInt, "2"}},
      {"world.ego_temporal_layers", {K::kInt, "2"}},
      {"world.mlp_ratio", {K::kInt, "2"}},
      {"world.history_frames", {K::kInt, "5"}},
      {"world.future_frames", {K::kInt, "6"}},
      {"world.max_frames", {K::kInt, "0"}},
      {"world.lambda2", {K::kDouble, "1"}},
      {"world.spatial_mixing", {K::kBool, "true"}},
      {"world.temporal_attention", {K::kBool, "true"}},
      {"world.lr", {K::kDouble, "0.001"}},
      {"world.lr_min", {K::kDouble, "0"}},
      {"world.weight_decay", {K::kDouble, "0.01"}},
      {"world.clip_norm", {K::kDouble, "5"}},
      {"world.steps", {K::kInt, "2000"}},
      {"world.batch", {K::kInt, "2"}},
      {"world.seed", {K::kUInt, "0"}},
      {"world.eval_every", {K::kInt, "0"}},
      {"world.eval_windows", {K::kInt, "0"}},
      {"world.decoding", {K::kDecoding, "argmax"}},

      {"eval.l2_mode", {K::kL2Mode, "at-horizon"}},
      {"eval.collision_length", {K::kDouble, "4"}},
      {"eval.collision_width", {K::kDouble, "2"}},
      {"eval.collision_height", {K::kDouble, "2"}},
  };
  return s;
}

RunConfig::RunConfig() {
  for (const auto& [key, entry] : schema()) values_[key] = entry.second;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const auto it = schema().find(key);
  if (it == schema().end()) throw ConfigError("unknown config key '" + key + "'");
  const std::string value = trim(raw);
  const auto bad = [&](const char* what) {
    return ConfigError(key + ": '" + value + "' is not " + what);
  };
  switch (it->second.first) {
    case Kind::kInt: {
      std::int64_t v = 0;
      if (!parse_int(value, v)) throw bad("an integer");
      break;
    }
    case Kind::kUInt: {
      std::uint64_t v = 0;
      const auto* end = value.data() + value.size();
      const auto r = std::from_chars(value.data(), end, v);
      if (value.empty() || r.ec != std::errc{} || r.ptr != end) throw bad("an unsigned integer");
      break;
    }
    case Kind::kDouble: {
      double v = 0.0;
      if (!parse_double(value, v)) throw bad("a finite number");
      break;
    }
    case Kind::kBool: {
      bool v = false;
      if (!parse_bool(value, v)) throw bad("a boolean");
      break;
    }
    case Kind::kGrid:
      parse_grid(value);
      break;
    case Kind::kDecoding:
      world::Decoding::parse(value);
      break;
    case Kind::kL2Mode:
      if (value != "at-horizon" && value != "averaged" && value != "both") throw bad("at-horizon|averaged|both");
      break;
    case Kind::kString:
      break;
  }
  values_[key] = value;
}

void RunConfig::parse(std::istream& in, const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(trim(body.substr(0, eq)), body.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  parse(in, path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  std::int64_t v = 0;
  if (!parse_int(get(key), v)) throw ConfigError(key + " is not an integer");
  return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto& s = get(key);
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{}) throw ConfigError(key + " is not an unsigned integer");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(get(key), v)) throw ConfigError(key + " is not a number");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(get(key), v)) throw ConfigError(key + " is not a boolean");
  return v;
}

std::string RunConfig::snapshot() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + "=" + value + "\n";
  return out;
}

void RunConfig::write_snapshot(const std::filesystem::path& path) const {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  out << snapshot();
  if (!out) throw IoError("cannot write config snapshot " + path.string());
}

tok::TokenizerConfig RunConfig::tokenizer_config() const {
  tok::TokenizerConfig c;
  c.dims = parse_grid(get("data.grid"));
  c.num_classes = static_cast<std::uint32_t>(get_int("data.classes"));
  c.d = static_cast<int>(get_int("tokenizer.d"));
  c.C = get_int("tokenizer.C");
  c.N = get_int("tokenizer.N");
  c.Cprime = get_int("tokenizer.Cprime");
  c.width = get_int("tokenizer.width");
  c.lambda1 = get_double("tokenizer.lambda1");
  c.beta = get_double("tokenizer.beta");
  c.validate();
  return c;
}

tok::TokenizerTrainConfig RunConfig::tokenizer_train_config() const {
  tok::TokenizerTrainConfig t;
  t.steps = get_int("tokenizer.steps");
  t.batch = get_int("tokenizer.batch");
  t.lr = get_double("tokenizer.lr");
  t.lr_min = get_double("tokenizer.lr_min");
  t.weight_decay = get_double("tokenizer.weight_decay");
  t.clip_norm = get_double("tokenizer.clip_norm");
  t.seed = get_uint("tokenizer.seed");
  t.eval_every = get_int("tokenizer.eval_every");
  t.eval_frames = get_int("tokenizer.eval_frames");
  t.codebook_init_frames = get_int("tokenizer.codebook_init_frames");
  if (t.steps < 1 || t.batch < 1) throw ConfigError("tokenizer.steps and tokenizer.batch must be >= 1");
  return t;
}

world::WorldConfig RunConfig::world_config(const tok::TokenizerConfig& tokenizer) const {
  world::WorldConfig c;
  c.token_h = tokenizer.token_h();
  c.token_w = tokenizer.token_w();
  c.C = tokenizer.C;
  c.N = tokenizer.N;
  c.width = get_int("world.width");
  c.K = static_cast<int>(get_int("world.K"));
  c.layers_per_scale = static_cast<int>(get_int("world.layers_per_scale"));
  c.heads = static_cast<int>(get_int("world.heads"));
  c.ego_spatial_layers = static_cast<int>(get_int("world.ego_spatial_layers"));
  c.ego_temporal_layers = static_cast<int>(get_int("world.ego_temporal_layers"));
  c.mlp_ratio = get_int("world.mlp_ratio");
  c.history_frames = static_cast<int>(get_int("world.history_frames"));
  c.future_frames = static_cast<int>(get_int("world.future_frames"));
  c.max_frames = static_cast<int>(get_int("world.max_frames"));
  c.lambda2 = get_double("world.lambda2");
  c.spatial_mixing = get_bool("world.spatial_mixing");
  c.temporal_attention = get_bool("world.temporal_attention");
  c.validate();
  return c;
}

world::WorldTrainConfig RunConfig::world_train_config() const {
  world::WorldTrainConfig t;
  t.steps = get_int("world.steps");
  t.batch = get_int("world.batch");
  t.lr = get_double("world.lr");
  t.lr_min = get_double("world.lr_min");
  t.weight_decay = get_double("world.weight_decay");
  t.clip_norm = get_double("world.clip_norm");
  t.seed = get_uint("world.seed");
  t.eval_every = get_int("world.eval_every");
  t.eval_windows = get_int("world.eval_windows");
  if (t.steps < 1 || t.batch < 1) throw ConfigError("world.steps and world.batch must be >= 1");
  return t;
}

world::Decoding RunConfig::decoding() const { return world::Decoding::parse(get("world.decoding"), get_uint("run.seed")); }

ScenarioMix RunConfig::scenario_mix() const {
  ScenarioMix m;
  m.p_lane_change = get_double("data.p_lane_change");
  m.p_turn = get_double("data.p_turn");
  m.ego_speeds = parse_list("data.ego_speeds", get("data.ego_speeds"));
  m.max_vehicles = static_cast<int>(get_int("data.max_vehicles"));
  m.max_pedestrians = static_cast<int>(get_int("data.max_pedestrians"));
  if (m.p_lane_change < 0 || m.p_turn < 0 || m.p_lane_change + m.p_turn > 1) {
    throw ConfigError("data.p_lane_change and data.p_turn must be probabilities summing to <= 1");
  }
  if (m.max_vehicles < 0 || m.max_pedestrians < 0) throw ConfigError("data: negative agent caps");
  return m;
}

}  // namespace occworld
