#include "occworld/tokenizer/lovasz.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "occworld/errors.hpp"
#include "occworld/numerics/autograd.hpp"

namespace occworld::tok {

nn::Tensor lovasz_softmax(const nn::Tensor& probs, std::span<const std::uint8_t> labels) {
  if (probs.rank() != 2 || static_cast<std::size_t>(probs.dim(0)) != labels.size()) {
    throw ShapeError("lovasz_softmax: probs " + nn::shape_str(probs.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::int64_t n = probs.dim(0), K = probs.dim(1);
  const auto p = probs.data();
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::int64_t c = 0; c < K; ++c) s += p[i * K + c];
    if (std::abs(s - 1.0) > 1e-6) throw ValidationError("lovasz_softmax: row " + std::to_string(i) + " sums to " + std::to_string(s));
  }
  std::vector<std::int64_t> gts(static_cast<std::size_t>(K), 0);
  for (auto l : labels) {
    if (l >= K) throw ValidationError("lovasz_softmax: label " + std::to_string(l) + " >= classes");
    ++gts[l];
  }
  const auto present = std::count_if(gts.begin(), gts.end(), [](auto g) { return g > 0; });

  // d(loss)/d(probs), filled while evaluating the forward.
  auto coef = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * K), 0.0);
  std::vector<double> err(static_cast<std::size_t>(n));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  double total = 0.0;
  for (std::int64_t c = 0; c < K; ++c) {
    if (gts[static_cast<std::size_t>(c)] == 0) continue;
    for (std::int64_t i = 0; i < n; ++i) {
      const double pc = p[i * K + c];
      err[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == c ? 1.0 - pc : pc;
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      const double ea = err[static_cast<std::size_t>(a)], eb = err[static_cast<std::size_t>(b)];
      return ea > eb || (ea == eb && a < b);
    });
    const double g_total = static_cast<double>(gts[static_cast<std::size_t>(c)]);
    double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0, loss_c = 0.0;
    for (std::int64_t r = 0; r < n; ++r) {
      const auto i = order[static_cast<std::size_t>(r)];
      const bool fg = labels[static_cast<std::size_t>(i)] == c;
      (fg ? cum_fg : cum_bg) += 1.0;
      const double jacc = 1.0 - (g_total - cum_fg) / (g_total + cum_bg);
      const double g = jacc - prev;
      prev = jacc;
      loss_c += err[static_cast<std::size_t>(i)] * g;
      (*coef)[static_cast<std::size_t>(i * K + c)] = (fg ? -g : g) / static_cast<double>(present);
    }
    total += loss_c;
  }
  const double value = present > 0 ? total / static_cast<double>(present) : 0.0;
  return nn::detail::make_result({}, {value}, "lovasz_softmax", {probs}, [probs, coef](nn::Node& self) {
    double* gp = probs.node()->grad_data();
    const double up = self.grad[0];
    for (std::size_t i = 0; i < coef->size(); ++i) gp[i] += up * (*coef)[i];
  });
}

}  // namespace occworld::tok
