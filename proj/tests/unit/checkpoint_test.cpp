#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "occworld/errors.hpp"
#include "occworld/numerics/checkpoint.hpp"
#include "occworld/numerics/layers.hpp"

namespace occworld {
namespace {

namespace fs = std::filesystem;
using nn::Init;
using nn::ParameterSet;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("occworld_ckpt_" + name);
  fs::remove_all(p);
  return p;
}

ParameterSet make(std::uint64_t seed) {
  ParameterSet ps(seed);
  ps.add("tokenizer.encoder.conv0.weight", {3, 3, 2, 4}, Init::kUniformFanIn, 18);
  ps.add("tokenizer.encoder.conv0.bias", {4}, Init::kZeros);
  ps.add("tokenizer.codebook", {5, 4}, Init::kUniformFanIn, 4);
  return ps;
}

TEST(ParameterSet, InitIsKeyedByNameNotOrder) {
  ParameterSet a(3), b(3);
  a.add("x", {4}, Init::kUniformFanIn, 4);
  a.add("y", {4}, Init::kUniformFanIn, 4);
  b.add("y", {4}, Init::kUniformFanIn, 4);
  b.add("x", {4}, Init::kUniformFanIn, 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.get("x").data()[i], b.get("x").data()[i]);
  for (double v : a.get("x").data()) EXPECT_LE(std::abs(v), 0.5);
  EXPECT_THROW(a.add("x", {1}, Init::kZeros), ConfigError);
}

TEST(Checkpoint, RoundTripF64IsExact) {
  auto dir = scratch("f64");
  auto src = make(1);
  nn::CheckpointMeta meta{"tokenizer", 1, 42, nn::BlobType::kF64, {{"config.tokenizer.d", "4"}}};
  nn::save_checkpoint(dir, src, meta);
  auto dst = make(2);
  auto m = nn::load_checkpoint(dir, dst);
  EXPECT_EQ(m.module, "tokenizer");
  EXPECT_EQ(m.step, 42);
  EXPECT_EQ(m.extra.at("config.tokenizer.d"), "4");
  for (std::size_t i = 0; i < src.entries().size(); ++i) {
    const auto& a = src.entries()[i].second;
    const auto& b = dst.entries()[i].second;
    for (std::int64_t j = 0; j < a.numel(); ++j) EXPECT_EQ(a.data()[j], b.data()[j]);
  }
  EXPECT_EQ(fs::file_size(dir / "tokenizer.codebook.bin"), 5u * 4u * 8u);
}

TEST(Checkpoint, F32StorageRoundsValues) {
  auto dir = scratch("f32");
  auto src = make(1);
  nn::save_checkpoint(dir, src, {"tokenizer", 1, 0, nn::BlobType::kF32, {}});
  EXPECT_EQ(fs::file_size(dir / "tokenizer.codebook.bin"), 5u * 4u * 4u);
  auto dst = make(2);
  nn::load_checkpoint(dir, dst);
  const auto& a = src.get("tokenizer.codebook");
  const auto& b = dst.get("tokenizer.codebook");
  for (std::int64_t j = 0; j < a.numel(); ++j) EXPECT_EQ(b.data()[j], static_cast<double>(static_cast<float>(a.data()[j])));
}

TEST(Checkpoint, ShapeMismatchRejected) {
  auto dir = scratch("shape");
  nn::save_checkpoint(dir, make(1), {"tokenizer", 1, 0, nn::BlobType::kF64, {}});
  ParameterSet other(1);
  other.add("tokenizer.encoder.conv0.weight", {3, 3, 2, 4}, Init::kZeros);
  other.add("tokenizer.encoder.conv0.bias", {4}, Init::kZeros);
  other.add("tokenizer.codebook", {6, 4}, Init::kZeros);
  EXPECT_THROW(nn::load_checkpoint(dir, other), FormatError);
}

TEST(Checkpoint, MissingParameterRejected) {
  auto dir = scratch("missing");
  nn::save_checkpoint(dir, make(1), {"tokenizer", 1, 0, nn::BlobType::kF64, {}});
  auto ps = make(1);
  ps.add("tokenizer.extra", {1}, Init::kZeros);
  EXPECT_THROW(nn::load_checkpoint(dir, ps), FormatError);
}

TEST(Checkpoint, TruncatedBlobRejected) {
  auto dir = scratch("trunc");
  nn::save_checkpoint(dir, make(1), {"tokenizer", 1, 0, nn::BlobType::kF64, {}});
  fs::resize_file(dir / "tokenizer.codebook.bin", 10);
  auto ps = make(1);
  EXPECT_THROW(nn::load_checkpoint(dir, ps), FormatError);
}

TEST(Checkpoint, MissingDirectoryIsIoError) {
  auto ps = make(1);
  EXPECT_THROW(nn::load_checkpoint(scratch("nothing"), ps), IoError);
}

}  // namespace
}  // namespace occworld
