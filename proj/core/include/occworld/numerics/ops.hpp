#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occworld/numerics/tensor.hpp"

// Differentiable primitives. Image-like tensors are channels-last
// [B, H, W, C]; every op raises ShapeError naming itself and the offending
// shapes on mismatch.
namespace occworld::nn {

// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& x);

/// a [..., k] x b [k, n] -> [..., n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [..., in] W [in, out] (+ bias [out] when defined).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

/// x [B, H, W, Cin], w [kh, kw, Cin, Cout], bias [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);
/// x [B, H, W, Cin], w [Cin, kh, kw, Cout]. Output extent (H-1)*stride - 2*padding + kh.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);

/// Normalizes over the last axis, then applies gamma/beta (both [C]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Softmax over the last axis.
Tensor softmax(const Tensor& x);
/// Mean over rows of -log softmax(logits)[target]; logits [n, K].
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

/// Multi-head scaled dot-product attention.
/// q [B, Tq, E], k and v [B, Tk, E], E divisible by `heads`. `bias` is added to
/// the scaled scores before the softmax and may be [Tq, Tk] or [heads, Tq, Tk];
/// -inf entries mask a key out. A bias that requires grad receives the
/// gradient of the scores (summed over the batch).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Tensor& bias = {});

/// One extent may be -1 and is inferred from the element count.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
/// [B, H, W, C] -> [B, H/2, W/2, 4C]; channel block order (dy, dx).
Tensor space_to_depth2(const Tensor& x);
/// [B, H, W, C] -> [B, 2H, 2W, C].
Tensor upsample_nearest2(const Tensor& x);
/// Rows of table [N, C] selected by indices -> [indices.size(), C].
Tensor embedding(const Tensor& table, std::span<const std::int64_t> indices);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Forward value of `quantized`; the incoming gradient flows to `latent`
/// unchanged (straight-through estimator). `quantized` receives nothing.
Tensor straight_through(const Tensor& latent, const Tensor& quantized);

}  // namespace occworld::nn
