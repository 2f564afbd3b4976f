#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "occworld/dataset.hpp"
#include "occworld/errors.hpp"

namespace occworld {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("occworld_dataset_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(Split, RoughlyEightyTenTen) {
  std::map<std::string, int> counts;
  const int n = 20000;
  for (int i = 0; i < n; ++i) counts[split_for_seed(static_cast<std::uint64_t>(i) * 7919 + 3)]++;
  EXPECT_NEAR(counts["train"] / double(n), 0.8, 0.02);
  EXPECT_NEAR(counts["val"] / double(n), 0.1, 0.015);
  EXPECT_NEAR(counts["test"] / double(n), 0.1, 0.015);
  EXPECT_EQ(counts.size(), 3u);
  EXPECT_EQ(split_for_seed(12345), split_for_seed(12345));
}

TEST(Dataset, GenerationIsDeterministicAndRoundTrips) {
  const auto a = scratch("a"), b = scratch("b");
  const GridDims dims{16, 16, 2};
  const auto ds = generate_dataset(a, 6, 4, 7, dims);
  generate_dataset(b, 6, 4, 7, dims);
  ASSERT_EQ(ds.entries.size(), 6u);
  for (const auto& e : ds.entries) {
    EXPECT_EQ(slurp(a / e.file), slurp(b / e.file)) << e.file;
    EXPECT_EQ(e.split, split_for_seed(e.seed));
  }
  EXPECT_EQ(slurp(a / kManifestName), slurp(b / kManifestName));

  const auto back = read_dataset(a);
  EXPECT_EQ(back.dims, dims);
  EXPECT_EQ(back.frames, 4);
  EXPECT_EQ(back.base_seed, 7u);
  ASSERT_EQ(back.entries.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(back.entries[i].file, ds.entries[i].file);
    EXPECT_EQ(back.entries[i].seed, ds.entries[i].seed);
    EXPECT_EQ(back.entries[i].split, ds.entries[i].split);
  }
  const auto all = back.load("all");
  ASSERT_EQ(all.size(), 6u);
  EXPECT_EQ(all[2].frames.size(), 4u);
  EXPECT_EQ(all[2].seed, ds.entries[2].seed);
  std::size_t parts = 0;
  for (const char* s : {"train", "val", "test"}) parts += back.split(s).size();
  EXPECT_EQ(parts, 6u);

  // Different base seeds give different scenes.
  const auto c = scratch("c");
  const auto other = generate_dataset(c, 1, 4, 8, dims);
  EXPECT_NE(other.entries[0].seed, ds.entries[0].seed);
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(Dataset, EmptyAndBrokenManifests) {
  const auto d = scratch("empty");
  const auto ds = generate_dataset(d, 0, 4, 1, {8, 8, 2});
  EXPECT_TRUE(ds.entries.empty());
  EXPECT_TRUE(read_dataset(d).load("test").empty());

  EXPECT_THROW(read_dataset(d / "nowhere"), IoError);
  std::ofstream(d / kManifestName) << "format=occworld-dataset\nversion=1\nscenes=2\nscene=a.occseq 1 train\n";
  EXPECT_THROW(read_dataset(d), FormatError);
  std::ofstream(d / kManifestName) << "format=occworld-dataset\nversion=1\ncolour=blue\n";
  EXPECT_THROW(read_dataset(d), FormatError);
  fs::remove_all(d);
}

TEST(Dataset, LoadRejectsMismatchedFiles) {
  const auto d = scratch("mismatch");
  auto ds = generate_dataset(d, 2, 3, 5, {16, 16, 2});
  ds.dims = {16, 16, 4};
  EXPECT_THROW(ds.load("all"), ValidationError);
  fs::remove_all(d);
}

}  // namespace
}  // namespace occworld
