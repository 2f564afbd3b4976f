#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "occworld/occgrid.hpp"
#include "occworld/synthetic.hpp"
#include "occworld/tokenizer/tokenizer.hpp"
#include "occworld/tokenizer/train.hpp"
#include "occworld/world/model.hpp"
#include "occworld/world/rollout.hpp"
#include "occworld/world/train.hpp"

namespace occworld {

/// "HxWxD" with three positive extents; ConfigError otherwise.
GridDims parse_grid(std::string_view text);
std::string grid_str(const GridDims& dims);

/// Flat key=value run configuration. Every key has a type and a default;
/// unknown keys and values that do not parse raise ConfigError.
class RunConfig {
 public:
  enum class Kind { kInt, kUInt, kDouble, kBool, kString, kGrid, kDecoding, kL2Mode };

  RunConfig();

  static const std::map<std::string, std::pair<Kind, std::string>>& schema();
  static bool known(const std::string& key) { return schema().count(key) != 0; }

  /// Lines of key=value; '#' starts a comment, blank lines are skipped.
  void parse(std::istream& in, const std::string& origin = "config");
  /// IoError when the file cannot be opened.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Every key, sorted, one key=value per line. Parsing it back gives an
  /// identical config.
  std::string snapshot() const;
  void write_snapshot(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  tok::TokenizerConfig tokenizer_config() const;
  tok::TokenizerTrainConfig tokenizer_train_config() const;
  world::WorldConfig world_config(const tok::TokenizerConfig& tokenizer) const;
  world::WorldTrainConfig world_train_config() const;
  world::Decoding decoding() const;
  ScenarioMix scenario_mix() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace occworld
