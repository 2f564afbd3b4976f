#include <gtest/gtest.h>

#include <cmath>

#include "occworld/errors.hpp"
#include "occworld/eval/metrics.hpp"
#include "occworld/numerics/gradcheck.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/tokenizer/lovasz.hpp"
#include "occworld/tokenizer/tokenizer.hpp"
#include "occworld/tokenizer/train.hpp"
#include "test_util.hpp"

namespace occworld {
namespace {

using nn::Shape;
using nn::Tensor;
using testing::random_tensor;

tok::TokenizerConfig tiny_config(GridDims dims = {8, 8, 2}) {
  tok::TokenizerConfig c;
  c.dims = dims;
  c.C = 4;
  c.N = 8;
  c.Cprime = 2;
  c.width = 3;
  return c;
}

OccGrid random_grid(GridDims dims, std::uint32_t classes, Rng& rng) {
  std::vector<std::uint8_t> l(static_cast<std::size_t>(dims.voxels()));
  for (auto& v : l) v = static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  return OccGrid(dims, classes, l);
}

TEST(EmbedBev, AllFreeGridRepeatsRowZero) {
  Rng rng(1);
  auto table = random_tensor({6, 3}, rng, false);
  OccGrid g({4, 4, 2}, 6);
  auto f = tok::embed_bev(g, table);
  ASSERT_EQ(f.shape(), (Shape{4, 4, 6}));
  for (std::int64_t i = 0; i < 16; ++i)
    for (std::int64_t j = 0; j < 6; ++j) EXPECT_EQ(f.data()[i * 6 + j], table.data()[j % 3]);
}

TEST(EmbedBev, ConcatenatesAlongHeight) {
  Tensor table(Shape{3, 2}, std::vector<double>{9, 9, 1, 0, 0, 1});
  OccGrid g({1, 1, 2}, 3, {1, 2});
  auto f = tok::embed_bev(g, table);
  ASSERT_EQ(f.shape(), (Shape{1, 1, 4}));
  EXPECT_EQ(std::vector<double>(f.data().begin(), f.data().end()), (std::vector<double>{1, 0, 0, 1}));
}

TEST(EmbedBev, EqualLabelsSwapInvariant) {
  Rng rng(2);
  auto table = random_tensor({6, 2}, rng, false);
  OccGrid a({1, 1, 3}, 6, {4, 1, 4});
  OccGrid b = a;  // swapping the two 4s changes nothing
  b.set(0, 0, 0, 4);
  b.set(0, 0, 2, 4);
  auto fa = tok::embed_bev(a, table), fb = tok::embed_bev(b, table);
  for (std::int64_t i = 0; i < fa.numel(); ++i) EXPECT_EQ(fa.data()[i], fb.data()[i]);
}

TEST(EmbedBev, ClassCountMismatch) {
  Tensor table(Shape{4, 2});
  OccGrid g({1, 1, 1}, 6);
  EXPECT_THROW(tok::embed_bev(g, table), ShapeError);
}

TEST(Encode, DefaultShapeContract) {
  tok::TokenizerConfig c;
  tok::Tokenizer model(c, 3);
  OccGrid g(c.dims, 6);
  const OccGrid* p = &g;
  nn::NoGradGuard guard;
  auto z = model.encode(model.embed({&p, 1}));
  EXPECT_EQ(z.shape(), (Shape{1, 16, 16, 128}));
  auto z2 = model.encode(model.embed({&p, 1}));
  for (std::int64_t i = 0; i < z.numel(); ++i) ASSERT_EQ(z.data()[i], z2.data()[i]);
}

TEST(Encode, IndivisibleInputRejected) {
  tok::Tokenizer model(tiny_config(), 1);
  EXPECT_THROW(model.encode(Tensor(Shape{1, 6, 8, 4})), ShapeError);
  auto bad = tiny_config({10, 8, 2});
  EXPECT_THROW(tok::Tokenizer(bad, 1), ShapeError);
}

TEST(Encode, GradCheckOnEightByEight) {
  Rng rng(4);
  tok::Tokenizer model(tiny_config(), 4);
  auto bev = random_tensor({1, 8, 8, 4}, rng);
  auto params = model.params().tensors();
  params.push_back(bev);
  auto r = nn::grad_check([&] { return testing::project(model.encode(bev), 9); }, params);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(Decode, DefaultShapeContract) {
  tok::TokenizerConfig c;
  tok::Tokenizer model(c, 3);
  nn::NoGradGuard guard;
  auto logits = model.decode(Tensor(Shape{1, 16, 16, 128}, 0.1));
  EXPECT_EQ(logits.shape(), (Shape{1, 64, 64, 8, 6}));
  auto probs = nn::softmax(nn::reshape(logits, {-1, 6}));
  for (std::int64_t r = 0; r < 200; ++r) {
    double s = 0;
    for (int k = 0; k < 6; ++k) s += probs.data()[r * 6 + k];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Decode, GradCheckOnFourByFourTokens) {
  Rng rng(5);
  auto c = tiny_config({16, 16, 2});
  tok::Tokenizer model(c, 5);
  auto tokens = random_tensor({1, 4, 4, c.C}, rng);
  auto params = model.params().tensors();
  params.push_back(tokens);
  auto r = nn::grad_check([&] { return testing::project(model.decode(tokens), 10); }, params);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(Quantize, ExactMatchPicksThatCode) {
  Rng rng(6);
  auto cb = random_tensor({16, 5}, rng, false);
  std::vector<double> site(cb.data().begin() + 7 * 5, cb.data().begin() + 8 * 5);
  auto t = tok::quantize(Tensor(Shape{1, 1, 1, 5}, site), cb);
  EXPECT_EQ(t.indices[0], 7);
  for (int c = 0; c < 5; ++c) EXPECT_EQ(t.quantized.data()[c], site[static_cast<std::size_t>(c)]);
}

TEST(Quantize, TieGoesToLowerIndex) {
  Tensor cb(Shape{3, 1}, std::vector<double>{5.0, -1.0, 1.0});
  auto t = tok::quantize(Tensor(Shape{1, 1, 1, 1}, 0.0), cb);
  EXPECT_EQ(t.indices[0], 1);
}

TEST(Quantize, MatchesBruteForceAcrossCodebookSizes) {
  for (std::int64_t N : {256, 512, 1024}) {
    Rng rng(static_cast<std::uint64_t>(N));
    auto cb = random_tensor({N, 8}, rng, false);
    auto z = random_tensor({1, 10, 10, 8}, rng, false);
    auto t = tok::quantize(z, cb);
    for (std::int64_t s = 0; s < 100; ++s) {
      std::int64_t best = -1;
      double bd = 0;
      for (std::int64_t k = 0; k < N; ++k) {
        double d = 0;
        for (int c = 0; c < 8; ++c) {
          const double diff = z.data()[s * 8 + c] - cb.data()[k * 8 + c];
          d += diff * diff;
        }
        if (best < 0 || d < bd) {
          bd = d;
          best = k;
        }
      }
      ASSERT_EQ(t.indices[static_cast<std::size_t>(s)], best) << "N=" << N << " site " << s;
    }
  }
}

TEST(Quantize, EmptyCodebookIsConfigError) {
  EXPECT_THROW(tok::quantize(Tensor(Shape{1, 1, 1, 2}), Tensor(Shape{0, 2})), ConfigError);
}

TEST(Quantize, StraightThroughCopiesGradient) {
  Rng rng(7);
  auto cb = random_tensor({6, 3}, rng, false);
  auto z = random_tensor({1, 2, 2, 3}, rng);
  auto t = tok::quantize(z, cb);
  auto w = random_tensor({1, 2, 2, 3}, rng, false);
  nn::sum(nn::mul(t.passthrough, w)).backward();
  for (std::int64_t i = 0; i < z.numel(); ++i) EXPECT_EQ(z.grad()[i], w.data()[i]);
}

TEST(Lovasz, PerfectPredictionIsZero) {
  Tensor p(Shape{3, 3}, std::vector<double>{1, 0, 0, 0, 0, 1, 0, 1, 0});
  std::vector<std::uint8_t> l{0, 2, 1};
  EXPECT_EQ(tok::lovasz_softmax(p, l).item(), 0.0);
}

TEST(Lovasz, UniformTwoVoxelHandValue) {
  // Class 0: errors (0.5 fg, 0.5 bg) -> jaccard steps (1, 0) -> 0.5.
  // Class 1: errors (0.5 bg, 0.5 fg) -> steps (0.5, 0.5) -> 0.5.
  Tensor p(Shape{2, 2}, 0.5);
  std::vector<std::uint8_t> l{0, 1};
  EXPECT_NEAR(tok::lovasz_softmax(p, l).item(), 0.5, 1e-12);
}

TEST(Lovasz, HardBinaryEqualsOneMinusIou) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> gt(9), pred(9);
    for (int i = 0; i < 9; ++i) {
      gt[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
      pred[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    }
    std::vector<double> probs;
    for (auto v : pred) {
      probs.push_back(v == 0 ? 1.0 : 0.0);
      probs.push_back(v == 1 ? 1.0 : 0.0);
    }
    const double loss = tok::lovasz_softmax(Tensor(Shape{9, 2}, probs), gt).item();
    // Oracle: per present class c, 1 - IoU of {pred == c} vs {gt == c} on a 3x3x1 grid.
    double expect = 0;
    int present = 0;
    for (std::uint8_t c = 0; c < 2; ++c) {
      std::vector<std::uint8_t> a(9), b(9);
      bool any = false;
      for (int i = 0; i < 9; ++i) {
        a[static_cast<std::size_t>(i)] = pred[static_cast<std::size_t>(i)] == c;
        b[static_cast<std::size_t>(i)] = gt[static_cast<std::size_t>(i)] == c;
        any = any || b[static_cast<std::size_t>(i)];
      }
      if (!any) continue;
      expect += 1.0 - eval::iou_binary(OccGrid({3, 3, 1}, 2, a), OccGrid({3, 3, 1}, 2, b));
      ++present;
    }
    EXPECT_NEAR(loss, expect / present, 1e-12) << "seed " << seed;
  }
}

TEST(Lovasz, InRangeAndGradChecks) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    auto logits = random_tensor({12, 4}, rng, true, -2, 2);
    std::vector<std::uint8_t> l(12);
    for (auto& v : l) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    auto f = [&] { return tok::lovasz_softmax(nn::softmax(logits), l); };
    const double v = f().item();
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LT(nn::grad_check(f, {logits}).max_rel_error, 1e-5) << "seed " << seed;
  }
}

TEST(Lovasz, UnnormalizedRejected) {
  Tensor p(Shape{1, 2}, std::vector<double>{0.6, 0.6});
  std::vector<std::uint8_t> l{0};
  EXPECT_THROW(tok::lovasz_softmax(p, l), ValidationError);
}

struct LossFixture {
  tok::Tokenizer model{tiny_config(), 11};
  OccGrid grid;
  LossFixture() {
    Rng rng(11);
    grid = random_grid({8, 8, 2}, 6, rng);
  }
};

TEST(TokenizerLoss, GlobalMinimumIsZero) {
  LossFixture f;
  const OccGrid* p = &f.grid;
  std::vector<double> logits;
  for (auto l : f.grid.labels())
    for (int k = 0; k < 6; ++k) logits.push_back(k == l ? 0.0 : -1000.0);
  Tensor lg(Shape{1, 8, 8, 2, 6}, logits);
  auto latent = f.model.lookup(std::vector<std::int64_t>(4, 3), 1).detach();
  auto tokens = f.model.quantize(latent);
  tok::LossBreakdown b;
  auto loss = tok::tokenizer_loss(lg, {&p, 1}, latent, tokens, 1.0, 0.25, &b);
  EXPECT_EQ(loss.item(), 0.0);
  EXPECT_EQ(b.cross_entropy, 0.0);
  EXPECT_EQ(b.lovasz, 0.0);
  EXPECT_EQ(b.codebook, 0.0);
  EXPECT_EQ(b.commitment, 0.0);
}

TEST(TokenizerLoss, UniformLogitsAndLambdaLinearity) {
  LossFixture f;
  const OccGrid* p = &f.grid;
  Tensor lg(Shape{1, 8, 8, 2, 6}, 0.0);
  Rng rng(3);
  auto latent = random_tensor({1, 2, 2, 4}, rng);
  auto tokens = f.model.quantize(latent);
  tok::LossBreakdown b1, b2;
  tok::tokenizer_loss(lg, {&p, 1}, latent, tokens, 1.0, 0.25, &b1);
  tok::tokenizer_loss(lg, {&p, 1}, latent, tokens, 2.0, 0.25, &b2);
  EXPECT_NEAR(b1.cross_entropy, std::log(6.0), 1e-12);
  EXPECT_EQ(b2.lovasz, 2.0 * b1.lovasz);
  EXPECT_EQ(b2.cross_entropy, b1.cross_entropy);
  EXPECT_EQ(b2.codebook, b1.codebook);
  EXPECT_NEAR(b1.commitment, 0.25 * b1.codebook, 1e-15);
}

TEST(Tokenizer, ReconstructionAlignsWithGridDims) {
  Rng rng(12);
  for (GridDims dims : {GridDims{8, 8, 2}, GridDims{16, 8, 3}, GridDims{4, 12, 1}}) {
    tok::Tokenizer model(tiny_config(dims), 12);
    auto g = random_grid(dims, 6, rng);
    const OccGrid* p = &g;
    auto r = model.reconstruct({&p, 1});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].dims(), dims);
    for (auto l : r[0].labels()) EXPECT_LT(l, 6);
  }
}

TEST(Tokenizer, ConstantWorldIsMemorized) {
  GridDims dims{16, 16, 2};
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(dims.voxels()), kDrivable);
  std::vector<OccGrid> frames(4, OccGrid(dims, 6, labels));
  auto c = tiny_config(dims);
  c.width = 8;
  tok::Tokenizer model(c, 13);
  tok::TokenizerTrainConfig tc;
  tc.steps = 200;
  tc.batch = 1;
  tc.codebook_init_frames = 1;
  tok::train_tokenizer(model, frames, frames, tc);
  auto score = tok::evaluate_reconstruction(model, frames);
  EXPECT_EQ(score.miou, 100.0);
  EXPECT_EQ(score.iou, 100.0);
}

TEST(Tokenizer, SameSeedSameParameters) {
  Rng rng(14);
  std::vector<OccGrid> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(random_grid({8, 8, 2}, 6, rng));
  auto run = [&] {
    tok::Tokenizer model(tiny_config(), 21);
    tok::TokenizerTrainConfig tc;
    tc.steps = 5;
    tc.batch = 2;
    tc.seed = 4;
    tok::train_tokenizer(model, frames, frames, tc);
    std::vector<double> all;
    for (const auto& [name, t] : model.params().entries()) all.insert(all.end(), t.data().begin(), t.data().end());
    return all;
  };
  EXPECT_EQ(run(), run());
}

TEST(Tokenizer, DivergenceAborts) {
  Rng rng(15);
  std::vector<OccGrid> frames{random_grid({8, 8, 2}, 6, rng)};
  tok::Tokenizer model(tiny_config(), 22);
  tok::TokenizerTrainConfig tc;
  tc.steps = 3;
  tc.batch = 1;
  tc.lr = 1e300;
  EXPECT_THROW(tok::train_tokenizer(model, frames, frames, tc), DivergenceError);
}

}  // namespace
}  // namespace occworld
