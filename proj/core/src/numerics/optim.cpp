#include "occworld/numerics/optim.hpp"

#include <cmath>
#include <numbers>

#include "occworld/errors.hpp"

namespace occworld::nn {

void adamw_step(const std::vector<Tensor>& params, OptimState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adamw_step: learning rate must be positive");
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
      state.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adamw_step: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  const auto& hp = state.hyper;
  ++state.step;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (static_cast<std::int64_t>(m.size()) != p.numel() || static_cast<std::int64_t>(v.size()) != p.numel()) {
      throw ShapeError("adamw_step: moment shape mismatch for parameter " + std::to_string(i) + " " +
                       shape_str(p.shape()));
    }
    auto data = p.data();
    const auto grad = p.grad();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      data[j] -= lr * hp.weight_decay * data[j];
      m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * g;
      v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      data[j] -= lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

double cosine_anneal_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
  if (step >= total_steps) return lr_min;
  if (step <= 0) return lr_max;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto p : params) {
      if (p.grad().empty()) continue;
      for (auto& g : p.mutable_grad()) g *= f;
    }
  }
  return norm;
}

}  // namespace occworld::nn
