#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "occworld/numerics/tensor.hpp"

namespace occworld::nn {

enum class Init { kUniformFanIn, kZeros, kOnes };

/// Ordered registry of named trainable tensors. Names are dotted paths that
/// double as checkpoint keys, e.g. "tokenizer.encoder.conv0.weight".
///
/// Weights are drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) using an
/// xoshiro256** stream keyed by (seed, name), so initial values do not depend
/// on registration order.
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t seed = 0) : seed_(seed) {}

  Tensor add(const std::string& name, Shape shape, Init init, double fan_in = 1.0);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::int64_t total_size() const;
  std::uint64_t seed() const { return seed_; }
  void zero_grad();

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct Linear {
  Tensor weight, bias;

  Linear() = default;
  Linear(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t out, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParameterSet& ps, const std::string& name, std::int64_t channels);
  Tensor operator()(const Tensor& x) const;
};

struct Conv2d {
  Tensor weight, bias;
  int stride = 1, padding = 0;

  Conv2d() = default;
  Conv2d(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t out, int kernel, int stride,
         int padding);
  Tensor operator()(const Tensor& x) const;
};

struct ConvTranspose2d {
  Tensor weight, bias;
  int stride = 1, padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t out, int kernel,
                  int stride, int padding);
  Tensor operator()(const Tensor& x) const;
};

/// Two linear layers with a GELU in between.
struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t hidden, std::int64_t out);
  Tensor operator()(const Tensor& x) const;
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterSet& ps, const std::string& name, std::int64_t width, int heads);
  /// queries [B, Tq, E], keys/values [B, Tk, E]; bias as in nn::attention.
  Tensor operator()(const Tensor& queries, const Tensor& keys_values, const Tensor& bias = {}) const;
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
/// With `cross`, queries attend to a separately normalized context.
struct TransformerBlock {
  LayerNorm ln_q, ln_kv, ln_mlp;
  MultiHeadAttention attn;
  Mlp mlp;
  bool cross = false;

  TransformerBlock() = default;
  TransformerBlock(ParameterSet& ps, const std::string& name, std::int64_t width, int heads, std::int64_t hidden,
                   bool cross = false);
  Tensor operator()(const Tensor& x, const Tensor& bias = {}) const;
  Tensor operator()(const Tensor& x, const Tensor& context, const Tensor& bias) const;
};

}  // namespace occworld::nn
