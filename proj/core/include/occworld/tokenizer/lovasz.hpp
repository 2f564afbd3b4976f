#pragma once

#include <cstdint>
#include <span>

#include "occworld/numerics/tensor.hpp"

namespace occworld::tok {

/// Lovasz extension of the Jaccard loss on class probabilities, averaged over
/// the classes present in `labels`. probs [n, K] (rows must sum to 1 within
/// 1e-6, else ValidationError), labels n class ids. Differentiable in probs.
nn::Tensor lovasz_softmax(const nn::Tensor& probs, std::span<const std::uint8_t> labels);

}  // namespace occworld::tok
