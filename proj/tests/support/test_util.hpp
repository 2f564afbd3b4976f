#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occworld/numerics/tensor.hpp"
#include "occworld/rng.hpp"

namespace occworld::testing {

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0,
                                double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(nn::numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return nn::Tensor(std::move(shape), std::move(v), requires_grad);
}

// sum(out * proj) for a fixed random projection: a scalar whose gradient
// touches every output entry with a distinct weight.
nn::Tensor project(const nn::Tensor& out, std::uint64_t seed);

}  // namespace occworld::testing
