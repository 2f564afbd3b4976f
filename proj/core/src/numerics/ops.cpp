#include "occworld/numerics/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "occworld/errors.hpp"
#include "occworld/numerics/autograd.hpp"

namespace occworld::nn {

using detail::make_result;
using detail::wants_grad;

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using SMapR = Eigen::Map<MatR, 0, Eigen::OuterStride<>>;
using CSMapR = Eigen::Map<const MatR, 0, Eigen::OuterStride<>>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_fail(const char* op, const std::string& msg) {
  throw ShapeError(std::string(op) + ": " + msg);
}

void require_rank(const char* op, const Tensor& t, std::size_t r) {
  if (t.rank() != r) {
    shape_fail(op, "expected rank " + std::to_string(r) + ", got " + shape_str(t.shape()));
  }
}

// ---- broadcasting -------------------------------------------------------

// Maps an output linear index to the input offset for one broadcast operand.
struct BroadcastMap {
  enum Kind { kSame, kTiled, kGeneral } kind = kSame;
  std::int64_t n = 1;
  std::vector<std::int64_t> index;

  std::int64_t operator()(std::int64_t i) const {
    switch (kind) {
      case kSame:
        return i;
      case kTiled:
        return i % n;
      default:
        return index[static_cast<std::size_t>(i)];
    }
  }
};

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) shape_fail(op, a, b);
    out[i] = std::max(ea, eb);
    if (ea == 0 || eb == 0) out[i] = 0;
  }
  return out;
}

BroadcastMap make_map(const Shape& in, const Shape& out) {
  BroadcastMap m;
  if (in == out) return m;
  m.n = numel(in);
  // Tiled: input (minus leading 1s) equals the trailing extents of out.
  std::size_t lead = 0;
  while (lead < in.size() && in[lead] == 1) ++lead;
  const std::size_t tail = in.size() - lead;
  bool tiled = tail <= out.size();
  for (std::size_t i = 0; tiled && i < tail; ++i) {
    tiled = in[lead + i] == out[out.size() - tail + i];
  }
  if (tiled) {
    m.kind = BroadcastMap::kTiled;
    return m;
  }
  m.kind = BroadcastMap::kGeneral;
  const std::size_t r = out.size();
  std::vector<std::int64_t> stride(r, 0);
  std::int64_t s = 1;
  for (std::size_t i = r; i-- > 0;) {
    const std::size_t off = r - in.size();
    if (i >= off) {
      const auto e = in[i - off];
      stride[i] = e == 1 ? 0 : s;
      s *= e;
    }
  }
  const auto total = numel(out);
  m.index.resize(static_cast<std::size_t>(total));
  std::vector<std::int64_t> ctr(r, 0);
  std::int64_t cur = 0;
  for (std::int64_t i = 0; i < total; ++i) {
    m.index[static_cast<std::size_t>(i)] = cur;
    for (std::size_t d = r; d-- > 0;) {
      ++ctr[d];
      cur += stride[d];
      if (ctr[d] < out[d]) break;
      cur -= stride[d] * ctr[d];
      ctr[d] = 0;
    }
  }
  return m;
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary_op(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  Shape out = broadcast_shape(name, a.shape(), b.shape());
  auto ma = std::make_shared<BroadcastMap>(make_map(a.shape(), out));
  auto mb = std::make_shared<BroadcastMap>(make_map(b.shape(), out));
  const auto n = numel(out);
  Buffer v(static_cast<std::size_t>(n));
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (ma->kind == BroadcastMap::kSame && mb->kind == BroadcastMap::kSame) {
    for (std::int64_t i = 0; i < n; ++i) {
      v[i] = kind == Binary::kAdd ? pa[i] + pb[i] : kind == Binary::kSub ? pa[i] - pb[i] : pa[i] * pb[i];
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      const double x = pa[(*ma)(i)], y = pb[(*mb)(i)];
      v[i] = kind == Binary::kAdd ? x + y : kind == Binary::kSub ? x - y : x * y;
    }
  }
  return make_result(std::move(out), std::move(v), name, {a, b}, [a, b, ma, mb, kind, n](Node& self) {
    const double* g = self.grad.data();
    if (wants_grad(a)) {
      double* ga = a.node()->grad_data();
      const double* pb2 = b.data().data();
      for (std::int64_t i = 0; i < n; ++i) {
        ga[(*ma)(i)] += kind == Binary::kMul ? g[i] * pb2[(*mb)(i)] : g[i];
      }
    }
    if (wants_grad(b)) {
      double* gb = b.node()->grad_data();
      const double* pa2 = a.data().data();
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = kind == Binary::kMul ? g[i] * pa2[(*ma)(i)] : kind == Binary::kSub ? -g[i] : g[i];
        gb[(*mb)(i)] += d;
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::kMul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  Buffer v(a.data().begin(), a.data().end());
  for (auto& x : v) x *= s;
  return make_result(a.shape(), std::move(v), "scale", {a}, [a, s](Node& self) {
    double* ga = a.node()->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += s * self.grad[i];
  });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  Buffer v(x.data().begin(), x.data().end());
  for (auto& t : v) t = 0.5 * t * (1.0 + std::erf(t * kInvSqrt2));
  return make_result(x.shape(), std::move(v), "gelu", {x}, [x](Node& self) {
    double* gx = x.node()->grad_data();
    const auto xs = x.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double t = xs[i];
      const double d = 0.5 * (1.0 + std::erf(t * kInvSqrt2)) + t * kInvSqrt2Pi * std::exp(-0.5 * t * t);
      gx[i] += self.grad[i] * d;
    }
  });
}

// ---- matmul / linear ----------------------------------------------------

namespace {

Tensor matmul_impl(const Tensor& a, const Tensor& w, const Tensor& bias, const char* name) {
  if (a.rank() < 1 || w.rank() != 2 || a.dim(-1) != w.dim(0)) shape_fail(name, a.shape(), w.shape());
  const std::int64_t k = w.dim(0), n = w.dim(1), m = a.numel() / std::max<std::int64_t>(k, 1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != n)) shape_fail(name, w.shape(), bias.shape());
  Shape out = a.shape();
  out.back() = n;
  Buffer v(static_cast<std::size_t>(m * n));
  MapR C(v.data(), m, n);
  C.noalias() = CMapR(a.data().data(), m, k) * CMapR(w.data().data(), k, n);
  if (bias.defined()) {
    Eigen::Map<const Eigen::RowVectorXd> bv(bias.data().data(), n);
    C.rowwise() += bv;
  }
  return make_result(std::move(out), std::move(v), name, {a, w, bias}, [a, w, bias, m, k, n](Node& self) {
    CMapR G(self.grad.data(), m, n);
    if (wants_grad(a)) {
      MapR(a.node()->grad_data(), m, k).noalias() += G * CMapR(w.data().data(), k, n).transpose();
    }
    if (wants_grad(w)) {
      MapR(w.node()->grad_data(), k, n).noalias() += CMapR(a.data().data(), m, k).transpose() * G;
    }
    if (wants_grad(bias)) {
      Eigen::Map<Eigen::RowVectorXd>(bias.node()->grad_data(), n) += G.colwise().sum();
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, Tensor{}, "matmul"); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) { return matmul_impl(x, w, bias, "linear"); }

// ---- convolutions -------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", w, 4);
  const std::int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const std::int64_t kh = w.dim(0), kw = w.dim(1), Co = w.dim(3);
  if (w.dim(2) != Ci) shape_fail("conv2d", x.shape(), w.shape());
  if (stride < 1 || padding < 0 || H + 2 * padding < kh || W + 2 * padding < kw) {
    shape_fail("conv2d", x.shape(), w.shape());
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Co)) shape_fail("conv2d", w.shape(), bias.shape());
  const std::int64_t Ho = (H + 2 * padding - kh) / stride + 1;
  const std::int64_t Wo = (W + 2 * padding - kw) / stride + 1;
  const std::int64_t rows = B * Ho * Wo, K = kh * kw * Ci;

  auto cols = std::make_shared<Buffer>(static_cast<std::size_t>(rows * K), 0.0);
  const double* px = x.data().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t oy = 0; oy < Ho; ++oy)
      for (std::int64_t ox = 0; ox < Wo; ++ox) {
        double* row = cols->data() + ((b * Ho + oy) * Wo + ox) * K;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          const std::int64_t iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= H) continue;
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const std::int64_t ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= W) continue;
            const double* src = px + ((b * H + iy) * W + ix) * Ci;
            std::copy(src, src + Ci, row + (ky * kw + kx) * Ci);
          }
        }
      }

  Buffer v(static_cast<std::size_t>(rows * Co));
  MapR out(v.data(), rows, Co);
  out.noalias() = CMapR(cols->data(), rows, K) * CMapR(w.data().data(), K, Co);
  if (bias.defined()) out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), Co);

  return make_result(
      Shape{B, Ho, Wo, Co}, std::move(v), "conv2d", {x, w, bias},
      [=](Node& self) {
        CMapR G(self.grad.data(), rows, Co);
        if (wants_grad(w)) MapR(w.node()->grad_data(), K, Co).noalias() += CMapR(cols->data(), rows, K).transpose() * G;
        if (wants_grad(bias)) Eigen::Map<Eigen::RowVectorXd>(bias.node()->grad_data(), Co) += G.colwise().sum();
        if (wants_grad(x)) {
          MatR dcols = G * CMapR(w.data().data(), K, Co).transpose();
          double* gx = x.node()->grad_data();
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t oy = 0; oy < Ho; ++oy)
              for (std::int64_t ox = 0; ox < Wo; ++ox) {
                const double* row = dcols.data() + ((b * Ho + oy) * Wo + ox) * K;
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                  const std::int64_t iy = oy * stride - padding + ky;
                  if (iy < 0 || iy >= H) continue;
                  for (std::int64_t kx = 0; kx < kw; ++kx) {
                    const std::int64_t ix = ox * stride - padding + kx;
                    if (ix < 0 || ix >= W) continue;
                    double* dst = gx + ((b * H + iy) * W + ix) * Ci;
                    const double* src = row + (ky * kw + kx) * Ci;
                    for (std::int64_t c = 0; c < Ci; ++c) dst[c] += src[c];
                  }
                }
              }
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
  require_rank("conv_transpose2d", x, 4);
  require_rank("conv_transpose2d", w, 4);
  const std::int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const std::int64_t kh = w.dim(1), kw = w.dim(2), Co = w.dim(3);
  if (w.dim(0) != Ci) shape_fail("conv_transpose2d", x.shape(), w.shape());
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Co)) {
    shape_fail("conv_transpose2d", w.shape(), bias.shape());
  }
  const std::int64_t Ho = (H - 1) * stride - 2 * padding + kh;
  const std::int64_t Wo = (W - 1) * stride - 2 * padding + kw;
  if (stride < 1 || padding < 0 || Ho < 1 || Wo < 1) shape_fail("conv_transpose2d", x.shape(), w.shape());
  const std::int64_t rows = B * H * W, K = kh * kw * Co;

  MatR cols = CMapR(x.data().data(), rows, Ci) * CMapR(w.data().data(), Ci, K);
  Buffer v(static_cast<std::size_t>(B * Ho * Wo * Co), 0.0);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t iy = 0; iy < H; ++iy)
      for (std::int64_t ix = 0; ix < W; ++ix) {
        const double* row = cols.data() + ((b * H + iy) * W + ix) * K;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          const std::int64_t oy = iy * stride - padding + ky;
          if (oy < 0 || oy >= Ho) continue;
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const std::int64_t ox = ix * stride - padding + kx;
            if (ox < 0 || ox >= Wo) continue;
            double* dst = v.data() + ((b * Ho + oy) * Wo + ox) * Co;
            const double* src = row + (ky * kw + kx) * Co;
            for (std::int64_t c = 0; c < Co; ++c) dst[c] += src[c];
          }
        }
      }
  if (bias.defined()) {
    const double* pb = bias.data().data();
    for (std::int64_t i = 0; i < B * Ho * Wo; ++i)
      for (std::int64_t c = 0; c < Co; ++c) v[i * Co + c] += pb[c];
  }

  return make_result(
      Shape{B, Ho, Wo, Co}, std::move(v), "conv_transpose2d", {x, w, bias},
      [=](Node& self) {
        const double* g = self.grad.data();
        if (wants_grad(bias)) {
          double* gb = bias.node()->grad_data();
          for (std::int64_t i = 0; i < B * Ho * Wo; ++i)
            for (std::int64_t c = 0; c < Co; ++c) gb[c] += g[i * Co + c];
        }
        if (!wants_grad(x) && !wants_grad(w)) return;
        MatR dcols = MatR::Zero(rows, K);
        for (std::int64_t b = 0; b < B; ++b)
          for (std::int64_t iy = 0; iy < H; ++iy)
            for (std::int64_t ix = 0; ix < W; ++ix) {
              double* row = dcols.data() + ((b * H + iy) * W + ix) * K;
              for (std::int64_t ky = 0; ky < kh; ++ky) {
                const std::int64_t oy = iy * stride - padding + ky;
                if (oy < 0 || oy >= Ho) continue;
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                  const std::int64_t ox = ix * stride - padding + kx;
                  if (ox < 0 || ox >= Wo) continue;
                  const double* src = g + ((b * Ho + oy) * Wo + ox) * Co;
                  std::copy(src, src + Co, row + (ky * kw + kx) * Co);
                }
              }
            }
        if (wants_grad(x)) {
          MapR(x.node()->grad_data(), rows, Ci).noalias() += dcols * CMapR(w.data().data(), Ci, K).transpose();
        }
        if (wants_grad(w)) {
          MapR(w.node()->grad_data(), Ci, K).noalias() += CMapR(x.data().data(), rows, Ci).transpose() * dcols;
        }
      });
}

// ---- normalization / softmax ---------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1) shape_fail("layer_norm", "input must have rank >= 1");
  const std::int64_t C = x.dim(-1), rows = x.numel() / std::max<std::int64_t>(C, 1);
  if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C) {
    shape_fail("layer_norm", x.shape(), gamma.shape());
  }
  auto xhat = std::make_shared<Buffer>(x.data().begin(), x.data().end());
  auto rstd = std::make_shared<Buffer>(static_cast<std::size_t>(rows));
  Buffer v(xhat->size());
  const double* pg = gamma.data().data();
  const double* pb = beta.data().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    double* h = xhat->data() + r * C;
    double mu = 0.0;
    for (std::int64_t c = 0; c < C; ++c) mu += h[c];
    mu /= static_cast<double>(C);
    double var = 0.0;
    for (std::int64_t c = 0; c < C; ++c) var += (h[c] - mu) * (h[c] - mu);
    var /= static_cast<double>(C);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::int64_t c = 0; c < C; ++c) {
      h[c] = (h[c] - mu) * rs;
      v[r * C + c] = h[c] * pg[c] + pb[c];
    }
  }
  return make_result(x.shape(), std::move(v), "layer_norm", {x, gamma, beta},
                     [x, gamma, beta, xhat, rstd, rows, C](Node& self) {
                       const double* g = self.grad.data();
                       const double* h = xhat->data();
                       if (wants_grad(gamma) || wants_grad(beta)) {
                         double* gg = wants_grad(gamma) ? gamma.node()->grad_data() : nullptr;
                         double* gb = wants_grad(beta) ? beta.node()->grad_data() : nullptr;
                         for (std::int64_t r = 0; r < rows; ++r)
                           for (std::int64_t c = 0; c < C; ++c) {
                             if (gg) gg[c] += g[r * C + c] * h[r * C + c];
                             if (gb) gb[c] += g[r * C + c];
                           }
                       }
                       if (!wants_grad(x)) return;
                       double* gx = x.node()->grad_data();
                       const double* pg = gamma.data().data();
                       const double invC = 1.0 / static_cast<double>(C);
                       for (std::int64_t r = 0; r < rows; ++r) {
                         double m1 = 0.0, m2 = 0.0;
                         for (std::int64_t c = 0; c < C; ++c) {
                           const double d = g[r * C + c] * pg[c];
                           m1 += d;
                           m2 += d * h[r * C + c];
                         }
                         m1 *= invC;
                         m2 *= invC;
                         const double rs = (*rstd)[r];
                         for (std::int64_t c = 0; c < C; ++c) {
                           const double d = g[r * C + c] * pg[c];
                           gx[r * C + c] += rs * (d - m1 - h[r * C + c] * m2);
                         }
                       }
                     });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() < 1) shape_fail("softmax", "input must have rank >= 1");
  const std::int64_t C = x.dim(-1), rows = x.numel() / std::max<std::int64_t>(C, 1);
  Buffer v(x.data().begin(), x.data().end());
  for (std::int64_t r = 0; r < rows; ++r) {
    double* p = v.data() + r * C;
    const double mx = *std::max_element(p, p + C);
    double s = 0.0;
    for (std::int64_t c = 0; c < C; ++c) s += (p[c] = std::exp(p[c] - mx));
    for (std::int64_t c = 0; c < C; ++c) p[c] /= s;
  }
  auto out = make_result(x.shape(), std::move(v), "softmax", {x}, {});
  if (out.requires_grad()) {
    // The closure cannot own its own node, so it keeps a copy of the output.
    auto y = std::make_shared<Buffer>(out.data().begin(), out.data().end());
    out.node()->backward = [x, y, rows, C](Node& self) {
      double* gx = x.node()->grad_data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* p = y->data() + r * C;
        const double* g = self.grad.data() + r * C;
        double dot = 0.0;
        for (std::int64_t c = 0; c < C; ++c) dot += g[c] * p[c];
        for (std::int64_t c = 0; c < C; ++c) gx[r * C + c] += p[c] * (g[c] - dot);
      }
    };
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
  require_rank("cross_entropy", logits, 2);
  const std::int64_t n = logits.dim(0), K = logits.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != n) {
    shape_fail("cross_entropy", logits.shape(), Shape{static_cast<std::int64_t>(targets.size())});
  }
  auto probs = std::make_shared<Buffer>(logits.data().begin(), logits.data().end());
  auto tgt = std::make_shared<std::vector<std::int32_t>>(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    const auto t = (*tgt)[r];
    if (t < 0 || t >= K) shape_fail("cross_entropy", "target " + std::to_string(t) + " outside [0, " + std::to_string(K) + ")");
    double* p = probs->data() + r * K;
    const double mx = *std::max_element(p, p + K);
    double s = 0.0;
    for (std::int64_t c = 0; c < K; ++c) s += std::exp(p[c] - mx);
    const double lse = mx + std::log(s);
    loss += lse - p[t];
    for (std::int64_t c = 0; c < K; ++c) p[c] = std::exp(p[c] - lse);
  }
  const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  return make_result(Shape{}, {loss * inv}, "cross_entropy", {logits}, [logits, probs, tgt, n, K, inv](Node& self) {
    const double g = self.grad[0] * inv;
    double* gl = logits.node()->grad_data();
    for (std::int64_t r = 0; r < n; ++r) {
      for (std::int64_t c = 0; c < K; ++c) gl[r * K + c] += g * (*probs)[r * K + c];
      gl[r * K + (*tgt)[r]] -= g;
    }
  });
}

// ---- attention ------------------------------------------------------------

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Tensor& bias) {
  require_rank("attention", q, 3);
  require_rank("attention", k, 3);
  require_rank("attention", v, 3);
  const std::int64_t B = q.dim(0), Tq = q.dim(1), E = q.dim(2), Tk = k.dim(1);
  if (k.dim(0) != B || v.dim(0) != B || k.dim(2) != E || v.dim(2) != E || v.dim(1) != Tk) {
    shape_fail("attention", q.shape(), k.shape());
  }
  if (heads < 1 || E % heads != 0) shape_fail("attention", "embedding " + std::to_string(E) + " not divisible by heads");
  const std::int64_t H = heads, dh = E / heads;
  bool bias_per_head = false;
  if (bias.defined()) {
    if (bias.rank() == 2 && bias.dim(0) == Tq && bias.dim(1) == Tk) {
      bias_per_head = false;
    } else if (bias.rank() == 3 && bias.dim(0) == H && bias.dim(1) == Tq && bias.dim(2) == Tk) {
      bias_per_head = true;
    } else {
      shape_fail("attention", Shape{H, Tq, Tk}, bias.shape());
    }
  }
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<Buffer>(static_cast<std::size_t>(B * H * Tq * Tk));
  Buffer out(static_cast<std::size_t>(B * Tq * E));
  const Eigen::OuterStride<> s_e(E);
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t h = 0; h < H; ++h) {
      CSMapR Q(q.data().data() + b * Tq * E + h * dh, Tq, dh, s_e);
      CSMapR Kh(k.data().data() + b * Tk * E + h * dh, Tk, dh, s_e);
      CSMapR V(v.data().data() + b * Tk * E + h * dh, Tk, dh, s_e);
      MapR P(probs->data() + (b * H + h) * Tq * Tk, Tq, Tk);
      P.noalias() = (Q * Kh.transpose()) * sc;
      if (bias.defined()) {
        P += CMapR(bias.data().data() + (bias_per_head ? h * Tq * Tk : 0), Tq, Tk);
      }
      for (std::int64_t i = 0; i < Tq; ++i) {
        double* row = P.data() + i * Tk;
        const double mx = *std::max_element(row, row + Tk);
        double s = 0.0;
        for (std::int64_t j = 0; j < Tk; ++j) s += (row[j] = std::exp(row[j] - mx));
        const double inv = 1.0 / s;
        for (std::int64_t j = 0; j < Tk; ++j) row[j] *= inv;
      }
      SMapR O(out.data() + b * Tq * E + h * dh, Tq, dh, s_e);
      O.noalias() = P * V;
    }
  }
  return make_result(
      Shape{B, Tq, E}, std::move(out), "attention", {q, k, v, bias},
      [=](Node& self) {
        const bool gq = wants_grad(q), gk = wants_grad(k), gv = wants_grad(v), gb = wants_grad(bias);
        double* dq = gq ? q.node()->grad_data() : nullptr;
        double* dk = gk ? k.node()->grad_data() : nullptr;
        double* dv = gv ? v.node()->grad_data() : nullptr;
        double* dbias = gb ? bias.node()->grad_data() : nullptr;
        const Eigen::OuterStride<> st(E);
        MatR dS(Tq, Tk);
        for (std::int64_t b = 0; b < B; ++b) {
          for (std::int64_t h = 0; h < H; ++h) {
            CSMapR dO(self.grad.data() + b * Tq * E + h * dh, Tq, dh, st);
            CMapR P(probs->data() + (b * H + h) * Tq * Tk, Tq, Tk);
            CSMapR Kh(k.data().data() + b * Tk * E + h * dh, Tk, dh, st);
            CSMapR V(v.data().data() + b * Tk * E + h * dh, Tk, dh, st);
            CSMapR Q(q.data().data() + b * Tq * E + h * dh, Tq, dh, st);
            if (gv) SMapR(dv + b * Tk * E + h * dh, Tk, dh, st).noalias() += P.transpose() * dO;
            if (!gq && !gk && !gb) continue;
            dS.noalias() = dO * V.transpose();
            for (std::int64_t i = 0; i < Tq; ++i) {
              double dot = 0.0;
              for (std::int64_t j = 0; j < Tk; ++j) dot += dS(i, j) * P(i, j);
              for (std::int64_t j = 0; j < Tk; ++j) dS(i, j) = P(i, j) * (dS(i, j) - dot);
            }
            if (gb) MapR(dbias + (bias_per_head ? h * Tq * Tk : 0), Tq, Tk) += dS;
            if (gq) SMapR(dq + b * Tq * E + h * dh, Tq, dh, st).noalias() += (dS * Kh) * sc;
            if (gk) SMapR(dk + b * Tk * E + h * dh, Tk, dh, st).noalias() += (dS.transpose() * Q) * sc;
          }
        }
      });
}

// ---- shape manipulation ---------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  const auto inferred = std::count(shape.begin(), shape.end(), -1);
  if (inferred == 1) {
    std::int64_t known = 1;
    for (auto e : shape) known *= e == -1 ? 1 : e;
    if (known > 0 && x.numel() % known == 0) *std::find(shape.begin(), shape.end(), -1) = x.numel() / known;
  }
  if (inferred > 1 || std::any_of(shape.begin(), shape.end(), [](auto e) { return e < 0; }) ||
      numel(shape) != x.numel()) {
    shape_fail("reshape", x.shape(), shape);
  }
  Buffer v(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(v), "reshape", {x}, [x](Node& self) {
    double* gx = x.node()->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const std::size_t r = x.rank();
  if (axes.size() != r) shape_fail("permute", x.shape(), Shape(axes.begin(), axes.end()));
  std::vector<bool> used(r, false);
  for (int a : axes) {
    if (a < 0 || static_cast<std::size_t>(a) >= r || used[a]) shape_fail("permute", x.shape(), Shape(axes.begin(), axes.end()));
    used[a] = true;
  }
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.shape()[i];
  Shape out(r);
  std::vector<std::int64_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out[i] = x.shape()[axes[i]];
    stride[i] = in_stride[axes[i]];
  }
  const auto n = x.numel();
  auto index = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n));
  std::vector<std::int64_t> ctr(r, 0);
  std::int64_t cur = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    (*index)[i] = cur;
    for (std::size_t d = r; d-- > 0;) {
      ++ctr[d];
      cur += stride[d];
      if (ctr[d] < out[d]) break;
      cur -= stride[d] * ctr[d];
      ctr[d] = 0;
    }
  }
  Buffer v(static_cast<std::size_t>(n));
  const double* px = x.data().data();
  for (std::int64_t i = 0; i < n; ++i) v[i] = px[(*index)[i]];
  return make_result(std::move(out), std::move(v), "permute", {x}, [x, index](Node& self) {
    double* gx = x.node()->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*index)[i]] += self.grad[i];
  });
}

Tensor space_to_depth2(const Tensor& x) {
  require_rank("space_to_depth2", x, 4);
  const std::int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  if (H % 2 || W % 2) shape_fail("space_to_depth2", "spatial extents " + shape_str(x.shape()) + " not even");
  const std::int64_t Ho = H / 2, Wo = W / 2;
  Buffer v(static_cast<std::size_t>(x.numel()));
  const double* px = x.data().data();
  auto src_of = [=](std::int64_t b, std::int64_t i, std::int64_t j, std::int64_t blk) {
    const std::int64_t dy = blk / 2, dx = blk % 2;
    return ((b * H + 2 * i + dy) * W + 2 * j + dx) * C;
  };
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < Ho; ++i)
      for (std::int64_t j = 0; j < Wo; ++j)
        for (std::int64_t blk = 0; blk < 4; ++blk)
          std::copy_n(px + src_of(b, i, j, blk), C, v.data() + ((b * Ho + i) * Wo + j) * 4 * C + blk * C);
  return make_result(Shape{B, Ho, Wo, 4 * C}, std::move(v), "space_to_depth2", {x}, [=](Node& self) {
    double* gx = x.node()->grad_data();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t i = 0; i < Ho; ++i)
        for (std::int64_t j = 0; j < Wo; ++j)
          for (std::int64_t blk = 0; blk < 4; ++blk) {
            const double* g = self.grad.data() + ((b * Ho + i) * Wo + j) * 4 * C + blk * C;
            double* d = gx + src_of(b, i, j, blk);
            for (std::int64_t c = 0; c < C; ++c) d[c] += g[c];
          }
  });
}

Tensor upsample_nearest2(const Tensor& x) {
  require_rank("upsample_nearest2", x, 4);
  const std::int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::int64_t Ho = 2 * H, Wo = 2 * W;
  Buffer v(static_cast<std::size_t>(B * Ho * Wo * C));
  const double* px = x.data().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t y = 0; y < Ho; ++y)
      for (std::int64_t xx = 0; xx < Wo; ++xx)
        std::copy_n(px + ((b * H + y / 2) * W + xx / 2) * C, C, v.data() + ((b * Ho + y) * Wo + xx) * C);
  return make_result(Shape{B, Ho, Wo, C}, std::move(v), "upsample_nearest2", {x}, [=](Node& self) {
    double* gx = x.node()->grad_data();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t y = 0; y < Ho; ++y)
        for (std::int64_t xx = 0; xx < Wo; ++xx) {
          const double* g = self.grad.data() + ((b * Ho + y) * Wo + xx) * C;
          double* d = gx + ((b * H + y / 2) * W + xx / 2) * C;
          for (std::int64_t c = 0; c < C; ++c) d[c] += g[c];
        }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int64_t> indices) {
  require_rank("embedding", table, 2);
  const std::int64_t N = table.dim(0), C = table.dim(1);
  auto idx = std::make_shared<std::vector<std::int64_t>>(indices.begin(), indices.end());
  Buffer v(idx->size() * static_cast<std::size_t>(C));
  const double* pt = table.data().data();
  for (std::size_t r = 0; r < idx->size(); ++r) {
    const auto i = (*idx)[r];
    if (i < 0 || i >= N) shape_fail("embedding", "index " + std::to_string(i) + " outside table of " + std::to_string(N) + " rows");
    std::copy_n(pt + i * C, C, v.data() + r * C);
  }
  return make_result(Shape{static_cast<std::int64_t>(idx->size()), C}, std::move(v), "embedding", {table},
                     [table, idx, C](Node& self) {
                       double* gt = table.node()->grad_data();
                       for (std::size_t r = 0; r < idx->size(); ++r) {
                         double* d = gt + (*idx)[r] * C;
                         const double* g = self.grad.data() + r * C;
                         for (std::int64_t c = 0; c < C; ++c) d[c] += g[c];
                       }
                     });
}

namespace {
std::pair<std::int64_t, std::int64_t> outer_inner(const Shape& s, std::size_t axis) {
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  return {outer, inner};
}
std::size_t norm_axis(const char* op, int axis, std::size_t rank) {
  const int a = axis < 0 ? axis + static_cast<int>(rank) : axis;
  if (a < 0 || static_cast<std::size_t>(a) >= rank) shape_fail(op, "axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(a);
}
}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  const std::size_t ax = norm_axis("concat", axis, parts[0].rank());
  Shape out = parts[0].shape();
  out[ax] = 0;
  for (const auto& p : parts) {
    if (p.rank() != out.size()) shape_fail("concat", parts[0].shape(), p.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (i != ax && p.shape()[i] != parts[0].shape()[i]) shape_fail("concat", parts[0].shape(), p.shape());
    }
    out[ax] += p.shape()[ax];
  }
  const auto [outer, inner] = outer_inner(out, ax);
  Buffer v(static_cast<std::size_t>(numel(out)));
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t chunk = p.shape()[ax] * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().data() + o * chunk, chunk, v.data() + o * out[ax] * inner + offset);
    }
    offset += chunk;
  }
  const std::int64_t total = out[ax];
  return make_result(out, std::move(v), "concat", parts, [parts, ax, outer, inner, total](Node& self) {
    std::int64_t off = 0;
    for (const auto& p : parts) {
      const std::int64_t chunk = p.shape()[ax] * inner;
      if (wants_grad(p)) {
        double* gp = p.node()->grad_data();
        for (std::int64_t o = 0; o < outer; ++o) {
          const double* g = self.grad.data() + o * total * inner + off;
          for (std::int64_t i = 0; i < chunk; ++i) gp[o * chunk + i] += g[i];
        }
      }
      off += chunk;
    }
  });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  const std::size_t ax = norm_axis("slice", axis, x.rank());
  if (start < 0 || length < 0 || start + length > x.shape()[ax]) {
    shape_fail("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) + ") outside " +
                            shape_str(x.shape()));
  }
  Shape out = x.shape();
  out[ax] = length;
  const auto [outer, inner] = outer_inner(x.shape(), ax);
  const std::int64_t ext = x.shape()[ax];
  Buffer v(static_cast<std::size_t>(numel(out)));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + (o * ext + start) * inner, length * inner, v.data() + o * length * inner);
  }
  return make_result(std::move(out), std::move(v), "slice", {x}, [=](Node& self) {
    double* gx = x.node()->grad_data();
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* g = self.grad.data() + o * length * inner;
      double* d = gx + (o * ext + start) * inner;
      for (std::int64_t i = 0; i < length * inner; ++i) d[i] += g[i];
    }
  });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result(Shape{}, {s}, "sum", {x}, [x](Node& self) {
    double* gx = x.node()->grad_data();
    const double g = self.grad[0];
    for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(std::max<std::int64_t>(x.numel(), 1));
  return scale(sum(x), 1.0 / n);
}

Tensor straight_through(const Tensor& latent, const Tensor& quantized) {
  if (latent.shape() != quantized.shape()) shape_fail("straight_through", latent.shape(), quantized.shape());
  Buffer v(quantized.data().begin(), quantized.data().end());
  return make_result(latent.shape(), std::move(v), "straight_through", {latent}, [latent](Node& self) {
    double* g = latent.node()->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace occworld::nn
