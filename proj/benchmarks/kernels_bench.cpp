#include <benchmark/benchmark.h>

#include "occworld/eval/metrics.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/rng.hpp"
#include "occworld/synthetic.hpp"
#include "occworld/tokenizer/tokenizer.hpp"

namespace occworld {
namespace {

using nn::Tensor;

Tensor random(const nn::Shape& shape, Rng& rng, bool grad = false) {
  Tensor t(shape, 0.0, grad);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = state.range(0);
  Rng rng(1);
  const auto a = random({n, n}, rng), b = random({n, n}, rng);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = state.range(0);
  Rng rng(2);
  const auto x = random({2, 32, 32, c}, rng, true), w = random({3, 3, c, c}, rng, true), b = random({c}, rng, true);
  for (auto _ : state) {
    nn::sum(nn::conv2d(x, w, b, 1, 1)).backward();
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(32);

void BM_AttentionForwardBackward(benchmark::State& state) {
  const auto tokens = state.range(0);
  Rng rng(3);
  const auto q = random({4, tokens, 64}, rng, true), k = random({4, tokens, 64}, rng, true),
             v = random({4, tokens, 64}, rng, true);
  for (auto _ : state) nn::sum(nn::attention(q, k, v, 4)).backward();
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(64)->Arg(256);

void BM_Quantize512(benchmark::State& state) {
  Rng rng(4);
  const auto latent = random({1, 16, 16, 128}, rng), codebook = random({512, 128}, rng);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(tok::quantize(latent, codebook).indices);
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Quantize512);

void BM_SemanticIou(benchmark::State& state) {
  SceneConfig sc;
  sc.dims = {64, 64, 8};
  sc.ego_speed = 3.2;
  const auto seq = generate_synthetic_world(sc, 2);
  for (auto _ : state) benchmark::DoNotOptimize(eval::miou_semantic(seq.frames[1].grid, seq.frames[0].grid));
}
BENCHMARK(BM_SemanticIou);

}  // namespace
}  // namespace occworld
