#include "occworld/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "occworld/config.hpp"
#include "occworld/errors.hpp"
#include "occworld/rng.hpp"

namespace occworld {

std::string split_for_seed(std::uint64_t seed) {
  std::uint64_t x = seed;
  const auto bucket = Rng::splitmix64(x) % 10;
  if (bucket < 8) return "train";
  return bucket == 8 ? "val" : "test";
}

std::vector<DatasetEntry> Dataset::split(const std::string& name) const {
  std::vector<DatasetEntry> out;
  for (const auto& e : entries) {
    if (name == "all" || e.split == name) out.push_back(e);
  }
  return out;
}

std::vector<OccSequence> Dataset::load(const std::string& split_name) const {
  std::vector<OccSequence> out;
  for (const auto& e : split(split_name)) {
    auto seq = load_sequence(dir / e.file);
    const auto& g = seq.frames.front().grid;
    if (!(g.dims() == dims) || g.num_classes() != num_classes) {
      throw ValidationError(e.file + ": grid " + grid_str(g.dims()) + " with " + std::to_string(g.num_classes()) +
                            " classes does not match the manifest " + grid_str(dims));
    }
    seq.scene_id = e.file;
    seq.seed = e.seed;
    out.push_back(std::move(seq));
  }
  return out;
}

Dataset generate_dataset(const std::filesystem::path& dir, std::int64_t scenes, std::int64_t frames,
                         std::uint64_t base_seed, GridDims dims, const ScenarioMix& mix) {
  if (scenes < 0) throw ConfigError("gen-data: negative scene count");
  if (frames < 1) throw ConfigError("gen-data: frames must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  Dataset ds;
  ds.dir = dir;
  ds.dims = dims;
  ds.frames = frames;
  ds.base_seed = base_seed;
  for (std::int64_t i = 0; i < scenes; ++i) {
    const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(i));
    const SceneConfig sc = sample_scene_config(seed, dims, mix);
    ds.num_classes = sc.num_classes;
    char name[48];
    std::snprintf(name, sizeof name, "scene_%05lld.occseq", static_cast<long long>(i));
    save_sequence(generate_synthetic_world(sc, frames), dir / name);
    ds.entries.push_back({name, seed, split_for_seed(seed)});
  }
  write_manifest(ds);
  return ds;
}

void write_manifest(const Dataset& ds) {
  std::ofstream out(ds.dir / kManifestName, std::ios::binary);
  out << "format=occworld-dataset\nversion=1\n";
  out << "grid=" << grid_str(ds.dims) << "\nclasses=" << ds.num_classes << "\nframes=" << ds.frames
      << "\nbase_seed=" << ds.base_seed << "\nscenes=" << ds.entries.size() << "\n";
  for (const auto& e : ds.entries) out << "scene=" << e.file << ' ' << e.seed << ' ' << e.split << "\n";
  if (!out) throw IoError("cannot write " + (ds.dir / kManifestName).string());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw IoError("no dataset manifest at " + path.string());
  Dataset ds;
  ds.dir = dir;
  std::string line;
  std::int64_t scenes = -1;
  bool format_ok = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": malformed line '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    try {
      if (key == "format") {
        format_ok = value == "occworld-dataset";
      } else if (key == "version") {
        if (value != "1") throw FormatError(path.string() + ": unsupported version " + value);
      } else if (key == "grid") {
        ds.dims = parse_grid(value);
      } else if (key == "classes") {
        ds.num_classes = static_cast<std::uint32_t>(std::stoul(value));
      } else if (key == "frames") {
        ds.frames = std::stoll(value);
      } else if (key == "base_seed") {
        ds.base_seed = std::stoull(value);
      } else if (key == "scenes") {
        scenes = std::stoll(value);
      } else if (key == "scene") {
        std::istringstream is(value);
        DatasetEntry e;
        if (!(is >> e.file >> e.seed >> e.split)) throw FormatError(path.string() + ": bad scene line '" + line + "'");
        ds.entries.push_back(e);
      } else {
        throw FormatError(path.string() + ": unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad value in '" + line + "'");
    } catch (const ConfigError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  if (!format_ok) throw FormatError(path.string() + ": not a dataset manifest");
  if (scenes != static_cast<std::int64_t>(ds.entries.size())) {
    throw FormatError(path.string() + ": scene count does not match the listed entries");
  }
  return ds;
}

}  // namespace occworld
