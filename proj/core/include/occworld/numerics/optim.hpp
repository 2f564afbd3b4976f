#pragma once

#include <cstdint>
#include <vector>

#include "occworld/numerics/tensor.hpp"

namespace occworld::nn {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimState {
  AdamWHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;  // first moments, one per parameter
  std::vector<std::vector<double>> v;  // second moments
};

/// One AdamW iteration over `params` using their accumulated grads (a
/// parameter without a grad is treated as having a zero gradient).
/// Weight decay is decoupled: p <- p - lr*wd*p, then the bias-corrected Adam
/// update p <- p - lr * m_hat / (sqrt(v_hat) + eps).
void adamw_step(const std::vector<Tensor>& params, OptimState& state, double lr);

/// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi * step / total_steps)).
/// Steps past total_steps return lr_min.
double cosine_anneal_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min);

/// Rescales all grads so their joint L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace occworld::nn
