#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "occworld/errors.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/numerics/optim.hpp"

namespace occworld {
namespace {

using nn::Shape;
using nn::Tensor;

void set_grad(Tensor& t, std::vector<double> g) {
  auto dst = t.mutable_grad();
  std::copy(g.begin(), g.end(), dst.begin());
}

TEST(AdamW, ZeroGradZeroDecayIsFixedPoint) {
  Tensor p(Shape{3}, std::vector<double>{1, -2, 3}, true);
  set_grad(p, {0, 0, 0});
  nn::OptimState st;
  st.hyper.weight_decay = 0.0;
  nn::adamw_step({p}, st, 0.1);
  EXPECT_EQ(p.data()[0], 1);
  EXPECT_EQ(p.data()[1], -2);
  EXPECT_EQ(p.data()[2], 3);
  EXPECT_EQ(st.step, 1);
}

TEST(AdamW, DecayOnlyStep) {
  Tensor p = Tensor::scalar(1.0, true);
  set_grad(p, {0});
  nn::OptimState st;
  nn::adamw_step({p}, st, 0.1);
  EXPECT_NEAR(p.item(), 0.999, 1e-15);
}

TEST(AdamW, FirstStepTranscript) {
  // m1 = 0.1*2 = 0.2, v1 = 0.001*4 = 0.004; m_hat = 2, v_hat = 4.
  Tensor p = Tensor::scalar(0.0, true);
  set_grad(p, {2});
  nn::OptimState st;
  st.hyper.weight_decay = 0.0;
  nn::adamw_step({p}, st, 1e-3);
  const double m_hat = 0.2 / (1 - 0.9), v_hat = 0.004 / (1 - 0.999);
  EXPECT_NEAR(p.item(), -1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
  EXPECT_NEAR(p.item(), -1e-3 * 2 / (2 + 1e-8), 1e-12);
}

TEST(AdamW, SecondStepTranscript) {
  Tensor p = Tensor::scalar(0.5, true);
  nn::OptimState st;
  const double lr = 0.01, wd = 0.01;
  double ref = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 1.0 : -3.0;
    set_grad(p, {g});
    nn::adamw_step({p}, st, lr);
    ref -= lr * wd * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ref -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.item(), ref, 1e-12);
}

TEST(AdamW, ShapeMismatchThrows) {
  Tensor p(Shape{2}, 0.0, true);
  nn::OptimState st;
  st.m = {{0.0}};
  st.v = {{0.0}};
  st.step = 1;
  EXPECT_THROW(nn::adamw_step({p}, st, 1e-3), ShapeError);
}

TEST(AdamW, NonPositiveLrThrows) {
  Tensor p(Shape{2}, 0.0, true);
  nn::OptimState st;
  EXPECT_THROW(nn::adamw_step({p}, st, 0.0), ConfigError);
}

TEST(Cosine, Endpoints) {
  EXPECT_EQ(nn::cosine_anneal_lr(0, 100, 1e-3, 1e-5), 1e-3);
  EXPECT_EQ(nn::cosine_anneal_lr(100, 100, 1e-3, 1e-5), 1e-5);
}

TEST(Cosine, Midpoint) { EXPECT_NEAR(nn::cosine_anneal_lr(50, 100, 1e-3, 0.0), 5e-4, 1e-18); }

TEST(Cosine, PastTotalClampsToMin) { EXPECT_EQ(nn::cosine_anneal_lr(150, 100, 1e-3, 2e-4), 2e-4); }

TEST(Cosine, MonotoneNonIncreasing) {
  double prev = 1.0;
  for (int s = 0; s <= 37; ++s) {
    const double lr = nn::cosine_anneal_lr(s, 37, 1.0, 0.1);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, 0.1);
    prev = lr;
  }
}

TEST(ClipGradNorm, RescalesToMax) {
  Tensor a(Shape{2}, 0.0, true), b(Shape{1}, 0.0, true);
  set_grad(a, {3, 0});
  set_grad(b, {4});
  const double n = nn::clip_grad_norm({a, b}, 1.0);
  EXPECT_DOUBLE_EQ(n, 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
}

TEST(ClipGradNorm, BelowMaxUntouched) {
  Tensor a(Shape{1}, 0.0, true);
  set_grad(a, {0.5});
  nn::clip_grad_norm({a}, 1.0);
  EXPECT_EQ(a.grad()[0], 0.5);
}

}  // namespace
}  // namespace occworld
