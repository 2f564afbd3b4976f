#include "occworld/checks.hpp"

#include <functional>
#include <limits>
#include <utility>

#include "occworld/numerics/gradcheck.hpp"
#include "occworld/numerics/layers.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/rng.hpp"
#include "occworld/world/model.hpp"
#include "occworld/world/train.hpp"

namespace occworld::checks {

namespace {

using nn::Shape;
using nn::Tensor;
using Made = std::pair<std::function<Tensor()>, std::vector<Tensor>>;

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(nn::numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), v, requires_grad);
}

std::int64_t pick(Rng& r, std::int64_t lo, std::int64_t hi) { return r.uniform_int(lo, hi); }

struct Case {
  const char* name;
  std::function<Made(Rng&)> make;
};

// The projection weights are drawn once, outside the objective, so that every
// evaluation of f sees the same function.
template <typename F>
Made projected(std::vector<Tensor> params, Rng& r, F body) {
  const auto probe = body();
  const auto w = random_tensor(probe.shape(), r, false);
  return {[=] { return nn::sum(nn::mul(body(), w)); }, std::move(params)};
}

std::vector<Case> cases() {
  std::vector<Case> out;
  out.push_back({"add", [](Rng& r) {
                   auto a = random_tensor({pick(r, 1, 3), pick(r, 2, 4)}, r);
                   auto b = random_tensor({a.dim(1)}, r);
                   return projected({a, b}, r, [=] { return nn::add(a, b); });
                 }});
  out.push_back({"sub", [](Rng& r) {
                   auto a = random_tensor({pick(r, 1, 3), 1, pick(r, 2, 4)}, r);
                   auto b = random_tensor({pick(r, 1, 3), a.dim(2)}, r);
                   return projected({a, b}, r, [=] { return nn::sub(a, b); });
                 }});
  out.push_back({"mul", [](Rng& r) {
                   auto a = random_tensor({pick(r, 1, 3), pick(r, 2, 4)}, r);
                   auto b = random_tensor({a.dim(0), 1}, r);
                   return projected({a, b}, r, [=] { return nn::mul(a, b); });
                 }});
  out.push_back({"scale", [](Rng& r) {
                   auto a = random_tensor({pick(r, 2, 6)}, r);
                   const double s = r.uniform(-2, 2);
                   return projected({a}, r, [=] { return nn::scale(a, s); });
                 }});
  out.push_back({"gelu", [](Rng& r) {
                   auto a = random_tensor({pick(r, 2, 6)}, r, true, -3, 3);
                   return projected({a}, r, [=] { return nn::gelu(a); });
                 }});
  out.push_back({"matmul", [](Rng& r) {
                   auto a = random_tensor({pick(r, 1, 2), pick(r, 1, 3), pick(r, 2, 4)}, r);
                   auto b = random_tensor({a.dim(2), pick(r, 1, 4)}, r);
                   return projected({a, b}, r, [=] { return nn::matmul(a, b); });
                 }});
  out.push_back({"linear", [](Rng& r) {
                   auto x = random_tensor({pick(r, 1, 4), pick(r, 2, 4)}, r);
                   auto w = random_tensor({x.dim(1), pick(r, 1, 3)}, r);
                   auto b = random_tensor({w.dim(1)}, r);
                   return projected({x, w, b}, r, [=] { return nn::linear(x, w, b); });
                 }});
  out.push_back({"conv2d", [](Rng& r) {
                   const int stride = static_cast<int>(pick(r, 1, 2)), pad = static_cast<int>(pick(r, 0, 1));
                   auto x = random_tensor({pick(r, 1, 2), pick(r, 3, 5), pick(r, 3, 5), pick(r, 1, 3)}, r);
                   auto w = random_tensor({3, 3, x.dim(3), pick(r, 1, 3)}, r);
                   auto b = random_tensor({w.dim(3)}, r);
                   return projected({x, w, b}, r, [=] { return nn::conv2d(x, w, b, stride, pad); });
                 }});
  out.push_back({"conv_transpose2d", [](Rng& r) {
                   auto x = random_tensor({1, pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)}, r);
                   auto w = random_tensor({x.dim(3), 4, 4, pick(r, 1, 2)}, r);
                   auto b = random_tensor({w.dim(3)}, r);
                   return projected({x, w, b}, r, [=] { return nn::conv_transpose2d(x, w, b, 2, 1); });
                 }});
  out.push_back({"layer_norm", [](Rng& r) {
                   auto x = random_tensor({pick(r, 1, 3), pick(r, 2, 5)}, r, true, -2, 2);
                   auto g = random_tensor({x.dim(1)}, r);
                   auto b = random_tensor({x.dim(1)}, r);
                   return projected({x, g, b}, r, [=] { return nn::layer_norm(x, g, b); });
                 }});
  out.push_back({"softmax", [](Rng& r) {
                   auto x = random_tensor({pick(r, 1, 3), pick(r, 2, 5)}, r, true, -2, 2);
                   return projected({x}, r, [=] { return nn::softmax(x); });
                 }});
  out.push_back({"cross_entropy", [](Rng& r) -> Made {
                   auto x = random_tensor({pick(r, 1, 4), pick(r, 2, 6)}, r, true, -2, 2);
                   std::vector<std::int32_t> t;
                   for (std::int64_t i = 0; i < x.dim(0); ++i) t.push_back(static_cast<std::int32_t>(pick(r, 0, x.dim(1) - 1)));
                   return {[=] { return nn::cross_entropy(x, t); }, {x}};
                 }});
  out.push_back({"attention", [](Rng& r) {
                   const int heads = static_cast<int>(pick(r, 1, 2));
                   const std::int64_t t = pick(r, 2, 4), e = 2 * heads;
                   auto q = random_tensor({pick(r, 1, 2), t, e}, r);
                   auto k = random_tensor({q.dim(0), t, e}, r);
                   auto v = random_tensor({q.dim(0), t, e}, r);
                   std::vector<double> bias(static_cast<std::size_t>(heads * t * t));
                   for (std::int64_t h = 0; h < heads; ++h)
                     for (std::int64_t i = 0; i < t; ++i)
                       for (std::int64_t j = 0; j < t; ++j)
                         bias[static_cast<std::size_t>((h * t + i) * t + j)] =
                             j > i ? -std::numeric_limits<double>::infinity() : r.uniform(-1, 1);
                   Tensor b(Shape{heads, t, t}, bias, true);
                   return projected({q, k, v, b}, r, [=] { return nn::attention(q, k, v, heads, b); });
                 }});
  out.push_back({"reshape", [](Rng& r) {
                   auto x = random_tensor({2, pick(r, 1, 3), 3}, r);
                   return projected({x}, r, [=] { return nn::reshape(x, {3, -1}); });
                 }});
  out.push_back({"permute", [](Rng& r) {
                   auto x = random_tensor({2, pick(r, 1, 3), 3}, r);
                   return projected({x}, r, [=] { return nn::permute(x, {2, 0, 1}); });
                 }});
  out.push_back({"space_to_depth2", [](Rng& r) {
                   auto x = random_tensor({1, 2 * pick(r, 1, 2), 2 * pick(r, 1, 2), pick(r, 1, 3)}, r);
                   return projected({x}, r, [=] { return nn::space_to_depth2(x); });
                 }});
  out.push_back({"upsample_nearest2", [](Rng& r) {
                   auto x = random_tensor({1, pick(r, 1, 3), pick(r, 1, 3), 2}, r);
                   return projected({x}, r, [=] { return nn::upsample_nearest2(x); });
                 }});
  out.push_back({"embedding", [](Rng& r) {
                   auto table = random_tensor({pick(r, 2, 5), pick(r, 1, 3)}, r);
                   std::vector<std::int64_t> idx;
                   for (int i = 0; i < 6; ++i) idx.push_back(pick(r, 0, table.dim(0) - 1));
                   return projected({table}, r, [=] { return nn::embedding(table, idx); });
                 }});
  out.push_back({"concat", [](Rng& r) {
                   auto a = random_tensor({2, pick(r, 1, 3)}, r);
                   auto b = random_tensor({2, pick(r, 1, 3)}, r);
                   return projected({a, b}, r, [=] { return nn::concat({a, b}, 1); });
                 }});
  out.push_back({"slice", [](Rng& r) {
                   auto a = random_tensor({2, pick(r, 3, 5)}, r);
                   return projected({a}, r, [=] { return nn::slice(a, 1, 1, a.dim(1) - 2); });
                 }});
  out.push_back({"sum", [](Rng& r) -> Made {
                   auto a = random_tensor({pick(r, 1, 4), 3}, r);
                   const double s = r.uniform(0.5, 2);
                   return {[=] { return nn::scale(nn::sum(a), s); }, {a}};
                 }});
  out.push_back({"mean", [](Rng& r) -> Made {
                   auto a = random_tensor({pick(r, 1, 4), 3}, r);
                   return {[=] { return nn::mean(nn::mul(a, a)); }, {a}};
                 }});
  // The quantized value is a detached copy of latent + offset, so the forward
  // value moves with latent and its true derivative is the identity the
  // estimator passes through.
  out.push_back({"straight_through", [](Rng& r) {
                   auto latent = random_tensor({pick(r, 1, 3), 2}, r);
                   const auto offset = random_tensor(latent.shape(), r, false);
                   return projected({latent}, r, [=] {
                     const auto q = nn::add(latent, offset).detach();
                     return nn::straight_through(latent, q);
                   });
                 }});
  out.push_back({"transformer_block", [](Rng& r) {
                   auto ps = std::make_shared<nn::ParameterSet>(r.next());
                   auto block = std::make_shared<nn::TransformerBlock>(*ps, "blk", 4, 2, 8);
                   auto x = random_tensor({1, pick(r, 2, 4), 4}, r);
                   const auto bias = world::causal_bias(x.dim(1));
                   auto params = ps->tensors();
                   params.push_back(x);
                   return projected(params, r, [=] { return (*block)(x, bias); });
                 }});
  out.push_back({"conv_stack", [](Rng& r) {
                   auto ps = std::make_shared<nn::ParameterSet>(r.next());
                   auto conv = std::make_shared<nn::Conv2d>(*ps, "conv", 2, 3, 3, 2, 1);
                   auto ln = std::make_shared<nn::LayerNorm>(*ps, "ln", 3);
                   auto up = std::make_shared<nn::ConvTranspose2d>(*ps, "up", 3, 2, 4, 2, 1);
                   auto x = random_tensor({1, 4, 4, 2}, r);
                   auto params = ps->tensors();
                   params.push_back(x);
                   return projected(params, r, [=] { return (*up)(nn::gelu((*ln)((*conv)(x)))); });
                 }});
  out.push_back({"world_model", [](Rng& r) -> Made {
                   world::WorldConfig c;
                   c.token_h = 4;
                   c.token_w = 4;
                   c.C = 4;
                   c.N = 8;
                   c.width = 4;
                   c.K = 1;
                   c.heads = 1;
                   c.layers_per_scale = 1;
                   c.ego_spatial_layers = 1;
                   c.ego_temporal_layers = 1;
                   c.history_frames = 3;
                   c.future_frames = 3;
                   auto m = std::make_shared<world::WorldModel>(c, r.next());
                   const std::int64_t B = 1, T = 3;
                   const auto scene = random_tensor({B * T, 4, 4, 4}, r, false);
                   const auto motion = random_tensor({B * T, 3}, r, false);
                   std::vector<std::int32_t> targets(static_cast<std::size_t>(B * T * 16));
                   for (auto& t : targets) t = static_cast<std::int32_t>(r.uniform_int(0, 7));
                   std::vector<Vec2> gt(static_cast<std::size_t>(B * T));
                   for (auto& g : gt) g = {r.uniform(-2, 2), r.uniform(-2, 2)};
                   return {[=] {
                             const auto o = m->forward(scene, motion, B, T);
                             return world::world_loss(o.logits, targets, o.displacement, gt, 1.0);
                           },
                           m->params().tensors()};
                 }});
  return out;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(int seeds, std::uint64_t base_seed) {
  std::vector<GradCheckCase> results;
  for (const auto& c : cases()) {
    GradCheckCase res;
    res.name = c.name;
    for (int s = 0; s < seeds; ++s) {
      Rng rng(mix_seed(base_seed + static_cast<std::uint64_t>(s), fnv1a(c.name)));
      auto [f, params] = c.make(rng);
      const auto r = nn::grad_check(f, params);
      if (s == 0 || r.max_rel_error > res.max_rel_error) {
        res.max_rel_error = r.max_rel_error;
        res.worst_seed = s;
        res.analytic = r.analytic;
        res.numeric = r.numeric;
      }
    }
    results.push_back(res);
  }
  return results;
}

std::size_t worst_case(const std::vector<GradCheckCase>& cases) {
  std::size_t w = 0;
  for (std::size_t i = 1; i < cases.size(); ++i) {
    if (cases[i].max_rel_error > cases[w].max_rel_error) w = i;
  }
  return w;
}

}  // namespace occworld::checks
