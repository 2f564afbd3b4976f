#include "occworld/numerics/layers.hpp"

#include <cmath>

#include "occworld/errors.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/rng.hpp"

namespace occworld::nn {

Tensor ParameterSet::add(const std::string& name, Shape shape, Init init, double fan_in) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  Tensor t(std::move(shape), 0.0, true);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      for (auto& v : t.data()) v = 1.0;
      break;
    case Init::kUniformFanIn: {
      Rng rng(mix_seed(seed_, fnv1a(name)));
      const double bound = 1.0 / std::sqrt(fan_in);
      for (auto& v : t.data()) v = rng.uniform(-bound, bound);
      break;
    }
  }
  entries_.emplace_back(name, t);
  return t;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ConfigError("unknown parameter " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

std::int64_t ParameterSet::total_size() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

Linear::Linear(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t out, bool with_bias)
    : weight(ps.add(name + ".weight", {in, out}, Init::kUniformFanIn, static_cast<double>(in))) {
  if (with_bias) bias = ps.add(name + ".bias", {out}, Init::kZeros);
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

LayerNorm::LayerNorm(ParameterSet& ps, const std::string& name, std::int64_t channels)
    : gamma(ps.add(name + ".gamma", {channels}, Init::kOnes)), beta(ps.add(name + ".beta", {channels}, Init::kZeros)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

Conv2d::Conv2d(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t out, int kernel, int stride_,
               int padding_)
    : weight(ps.add(name + ".weight", {kernel, kernel, in, out}, Init::kUniformFanIn,
                    static_cast<double>(in * kernel * kernel))),
      bias(ps.add(name + ".bias", {out}, Init::kZeros)),
      stride(stride_),
      padding(padding_) {}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

ConvTranspose2d::ConvTranspose2d(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t out,
                                 int kernel, int stride_, int padding_)
    // Each output pixel sees about in * (kernel / stride)^2 inputs.
    : weight(ps.add(name + ".weight", {in, kernel, kernel, out}, Init::kUniformFanIn,
                    static_cast<double>(in * kernel * kernel) / static_cast<double>(stride_ * stride_))),
      bias(ps.add(name + ".bias", {out}, Init::kZeros)),
      stride(stride_),
      padding(padding_) {}

Tensor ConvTranspose2d::operator()(const Tensor& x) const {
  return conv_transpose2d(x, weight, bias, stride, padding);
}

Mlp::Mlp(ParameterSet& ps, const std::string& name, std::int64_t in, std::int64_t hidden, std::int64_t out)
    : fc1(ps, name + ".fc1", in, hidden), fc2(ps, name + ".fc2", hidden, out) {}

Tensor Mlp::operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }

MultiHeadAttention::MultiHeadAttention(ParameterSet& ps, const std::string& name, std::int64_t width, int heads_)
    : q(ps, name + ".q", width, width),
      // A key bias only shifts each query's scores by a constant, which the
      // softmax cancels; it would be a parameter with identically zero grad.
      k(ps, name + ".k", width, width, false),
      v(ps, name + ".v", width, width),
      o(ps, name + ".o", width, width),
      heads(heads_) {
  if (heads < 1 || width % heads != 0) {
    throw ConfigError(name + ": width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& keys_values, const Tensor& bias) const {
  return o(attention(q(queries), k(keys_values), v(keys_values), heads, bias));
}

TransformerBlock::TransformerBlock(ParameterSet& ps, const std::string& name, std::int64_t width, int heads,
                                   std::int64_t hidden, bool cross_)
    : ln_q(ps, name + ".ln_q", width),
      ln_mlp(ps, name + ".ln_mlp", width),
      attn(ps, name + ".attn", width, heads),
      mlp(ps, name + ".mlp", width, hidden, width),
      cross(cross_) {
  if (cross) ln_kv = LayerNorm(ps, name + ".ln_kv", width);
}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor& bias) const {
  const Tensor h = ln_q(x);
  Tensor y = add(x, attn(h, h, bias));
  return add(y, mlp(ln_mlp(y)));
}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor& context, const Tensor& bias) const {
  Tensor y = add(x, attn(ln_q(x), ln_kv(context), bias));
  return add(y, mlp(ln_mlp(y)));
}

}  // namespace occworld::nn
