#include "occworld/numerics/gradcheck.hpp"

#include <cmath>

#include "occworld/errors.hpp"

namespace occworld::nn {

namespace {
double eval_scalar(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}
}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double eps) {
  for (auto p : params) p.zero_grad();
  const Tensor root = f();
  if (!std::isfinite(root.item())) throw NumericError("grad_check: function value is not finite");
  root.backward();

  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto data = p.data();
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      const double saved = data[j];
      data[j] = saved + eps;
      const double up = eval_scalar(f);
      data[j] = saved - eps;
      const double down = eval_scalar(f);
      data[j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.empty() ? 0.0 : analytic[j];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++res.entries_checked;
      if (rel > res.max_rel_error || res.entries_checked == 1) {
        res.max_rel_error = rel;
        res.worst_param = i;
        res.worst_entry = j;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace occworld::nn
