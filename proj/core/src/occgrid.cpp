#include "occworld/occgrid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "occworld/errors.hpp"

namespace occworld {

static_assert(std::endian::native == std::endian::little, ".occseq I/O assumes a little-endian host");

OccGrid::OccGrid(GridDims dims, std::uint32_t num_classes, double voxel_size)
    : dims_(dims), num_classes_(num_classes), voxel_size_(voxel_size) {
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ConfigError("OccGrid: every extent must be >= 1");
  if (num_classes < 1 || num_classes > 256) throw ConfigError("OccGrid: num_classes must be in [1, 256]");
  labels_.assign(static_cast<std::size_t>(dims.voxels()), kFree);
}

OccGrid::OccGrid(GridDims dims, std::uint32_t num_classes, std::vector<std::uint8_t> labels, double voxel_size)
    : OccGrid(dims, num_classes, voxel_size) {
  if (static_cast<std::int64_t>(labels.size()) != dims.voxels()) {
    throw ValidationError("OccGrid: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(dims.voxels()) + " voxels");
  }
  for (auto l : labels) {
    if (l >= num_classes) throw ValidationError("OccGrid: label " + std::to_string(l) + " >= num_classes");
  }
  labels_ = std::move(labels);
}

void OccGrid::set(std::int64_t h, std::int64_t w, std::int64_t d, std::uint8_t label) {
  if (label >= num_classes_) throw ValidationError("OccGrid: label " + std::to_string(label) + " >= num_classes");
  labels_[index(h, w, d)] = label;
}

double OccGrid::occupancy_fraction() const {
  if (labels_.empty()) return 0.0;
  const auto n = std::count_if(labels_.begin(), labels_.end(), [](std::uint8_t l) { return l != kFree; });
  return static_cast<double>(n) / static_cast<double>(labels_.size());
}

void OccSequence::validate() const {
  if (frames.empty()) throw ValidationError("OccSequence: needs at least one frame");
  if (frame_dt_ms == 0) throw ValidationError("OccSequence: frame_dt must be positive");
  const auto& g0 = frames.front().grid;
  for (const auto& f : frames) {
    if (!(f.grid.dims() == g0.dims()) || f.grid.num_classes() != g0.num_classes()) {
      throw ValidationError("OccSequence: frames disagree on dims or class count");
    }
  }
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }

// Tracks the byte offset so truncation errors can say where the data ran out.
class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  void read(void* dst, std::size_t n, const char* what) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(is_.gcount());
    offset_ += got;
    if (got != n) throw TruncationError(std::string(".occseq: stream ended inside ") + what, offset_);
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    read(&v, 4, what);
    return v;
  }
  float f32(const char* what) {
    float v;
    read(&v, 4, what);
    return v;
  }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void save_sequence(const OccSequence& seq, std::ostream& sink) {
  seq.validate();
  const auto& g0 = seq.frames.front().grid;
  sink.write("OCCS", 4);
  put_u32(sink, kOccSeqVersion);
  put_u32(sink, static_cast<std::uint32_t>(g0.dims().h));
  put_u32(sink, static_cast<std::uint32_t>(g0.dims().w));
  put_u32(sink, static_cast<std::uint32_t>(g0.dims().d));
  put_u32(sink, g0.num_classes());
  put_u32(sink, static_cast<std::uint32_t>(seq.frames.size()));
  put_u32(sink, seq.frame_dt_ms);
  for (const auto& f : seq.frames) {
    put_f32(sink, f.pose.x);
    put_f32(sink, f.pose.y);
    put_f32(sink, f.pose.yaw);
    sink.write(reinterpret_cast<const char*>(f.grid.labels().data()),
               static_cast<std::streamsize>(f.grid.labels().size()));
  }
  sink.flush();
  if (!sink) throw IoError(".occseq: write failed");
}

void save_sequence(const OccSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(".occseq: cannot open " + path.string() + " for writing");
  save_sequence(seq, out);
}

OccSequence load_sequence(std::istream& source) {
  Reader r(source);
  std::array<char, 4> magic{};
  r.read(magic.data(), 4, "magic");
  if (std::memcmp(magic.data(), "OCCS", 4) != 0) throw FormatError(".occseq: bad magic");
  const auto version = r.u32("header");
  if (version != kOccSeqVersion) throw FormatError(".occseq: unsupported version " + std::to_string(version));
  GridDims dims;
  dims.h = r.u32("header");
  dims.w = r.u32("header");
  dims.d = r.u32("header");
  const auto classes = r.u32("header");
  const auto nframes = r.u32("header");
  OccSequence seq;
  seq.frame_dt_ms = r.u32("header");
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ValidationError(".occseq: zero grid extent");
  if (classes < 1 || classes > 256) throw ValidationError(".occseq: num_classes outside [1, 256]");
  if (nframes < 1) throw ValidationError(".occseq: sequence has no frames");
  if (seq.frame_dt_ms == 0) throw ValidationError(".occseq: frame_dt must be positive");

  seq.frames.reserve(nframes);
  for (std::uint32_t i = 0; i < nframes; ++i) {
    OccFrame f;
    f.pose.x = r.f32("frame pose");
    f.pose.y = r.f32("frame pose");
    f.pose.yaw = r.f32("frame pose");
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(dims.voxels()));
    r.read(labels.data(), labels.size(), "frame labels");
    f.grid = OccGrid(dims, classes, std::move(labels));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

OccSequence load_sequence(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(".occseq: cannot open " + path.string());
  return load_sequence(in);
}

}  // namespace occworld
