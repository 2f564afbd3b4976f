#pragma once

// Helpers for implementing differentiable ops. Not part of the stable API.

#include <initializer_list>
#include <vector>

#include "occworld/numerics/tensor.hpp"

namespace occworld::nn::detail {

/// Builds the output of an op. The backward closure receives the output node
/// (whose grad is populated) and must accumulate into each parent that
/// requires grad. Nothing is recorded when grad mode is off or no parent
/// requires grad.
Tensor make_result(Shape shape, Buffer values, const char* op,
                   const std::vector<Tensor>& parents, std::function<void(Node&)> backward);

inline bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

}  // namespace occworld::nn::detail
