#include "occworld/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "occworld/errors.hpp"

namespace occworld::nn {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

namespace {

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out.empty() ? "scalar" : out;
}

Shape parse_shape(const std::string& text) {
  if (text == "scalar") return {};
  Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      s.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad shape '" + text + "'");
    }
  }
  return s;
}

struct Manifest {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Shape>> params;
};

Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("checkpoint: cannot open " + (dir / "manifest.txt").string());
  Manifest m;
  bool have_version = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed manifest line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "format_version") {
      if (value != std::to_string(kCheckpointFormatVersion)) {
        throw FormatError("checkpoint: unsupported format version " + value);
      }
      have_version = true;
    } else if (key == "module") {
      m.meta.module = value;
    } else if (key == "seed") {
      m.meta.seed = std::stoull(value);
    } else if (key == "step") {
      m.meta.step = std::stoll(value);
    } else if (key == "dtype") {
      if (value == "f64") {
        m.meta.dtype = BlobType::kF64;
      } else if (value == "f32") {
        m.meta.dtype = BlobType::kF32;
      } else {
        throw FormatError("checkpoint: unknown dtype " + value);
      }
    } else if (key.rfind("param.", 0) == 0) {
      m.params.emplace_back(key.substr(6), parse_shape(value));
    } else {
      m.meta.extra[key] = value;
    }
  }
  if (!have_version) throw FormatError("checkpoint: manifest lacks format_version");
  return m;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParameterSet& params, const CheckpointMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("checkpoint: cannot create " + dir.string() + ": " + ec.message());
  std::ofstream man(dir / "manifest.txt", std::ios::trunc);
  man << "format_version=" << kCheckpointFormatVersion << '\n'
      << "module=" << meta.module << '\n'
      << "seed=" << meta.seed << '\n'
      << "step=" << meta.step << '\n'
      << "dtype=" << (meta.dtype == BlobType::kF64 ? "f64" : "f32") << '\n';
  for (const auto& [k, v] : meta.extra) man << k << '=' << v << '\n';
  for (const auto& [name, t] : params.entries()) man << "param." << name << '=' << shape_text(t.shape()) << '\n';
  man.flush();
  if (!man) throw IoError("checkpoint: failed writing manifest in " + dir.string());

  for (const auto& [name, t] : params.entries()) {
    std::ofstream blob(dir / (name + ".bin"), std::ios::binary | std::ios::trunc);
    if (meta.dtype == BlobType::kF64) {
      blob.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    } else {
      std::vector<float> f(t.data().begin(), t.data().end());
      blob.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    }
    if (!blob) throw IoError("checkpoint: failed writing blob for " + name);
  }
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) { return read_manifest(dir).meta; }

CheckpointMeta load_checkpoint(const fs::path& dir, const ParameterSet& params) {
  const Manifest m = read_manifest(dir);
  if (m.params.size() != params.entries().size()) {
    throw FormatError("checkpoint: " + dir.string() + " holds " + std::to_string(m.params.size()) +
                      " parameters, model expects " + std::to_string(params.entries().size()));
  }
  for (const auto& [name, shape] : m.params) {
    if (!params.contains(name)) throw FormatError("checkpoint: unexpected parameter " + name);
    Tensor t = params.get(name);
    if (t.shape() != shape) {
      throw FormatError("checkpoint: shape mismatch for " + name + ": file " + shape_str(shape) + ", model " +
                        shape_str(t.shape()));
    }
    std::ifstream blob(dir / (name + ".bin"), std::ios::binary);
    if (!blob) throw IoError("checkpoint: missing blob for " + name);
    const std::size_t n = static_cast<std::size_t>(t.numel());
    auto data = t.data();
    if (m.meta.dtype == BlobType::kF64) {
      blob.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
      std::vector<float> f(n);
      blob.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * sizeof(float)));
      std::copy(f.begin(), f.end(), data.begin());
    }
    if (!blob || blob.peek() != std::char_traits<char>::eof()) {
      throw FormatError("checkpoint: blob size mismatch for " + name);
    }
  }
  return m.meta;
}

}  // namespace occworld::nn
