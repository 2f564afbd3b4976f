#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "occworld/numerics/tensor.hpp"

namespace occworld::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;  // index into the params vector
  std::int64_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::int64_t entries_checked = 0;
};

/// Compares backprop against central differences for every entry of every
/// tensor in `params`. The relative error of one entry is
/// |a - n| / max(1e-8, |a| + |n|). `f` must rebuild its graph on every call
/// and return a scalar. Throws NumericError if f is not finite.
GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double eps = 1e-5);

}  // namespace occworld::nn
