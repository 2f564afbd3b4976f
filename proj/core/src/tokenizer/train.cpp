#include "occworld/tokenizer/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "occworld/errors.hpp"
#include "occworld/eval/metrics.hpp"
#include "occworld/numerics/optim.hpp"
#include "occworld/rng.hpp"

namespace occworld::tok {

ReconstructionScore evaluate_reconstruction(const Tokenizer& model, std::span<const OccGrid> frames,
                                            std::int64_t batch) {
  eval::IouAccumulator acc(model.config().num_classes);
  std::set<std::int64_t> used;
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(batch)) {
    std::vector<const OccGrid*> chunk;
    for (std::size_t j = i; j < std::min(frames.size(), i + static_cast<std::size_t>(batch)); ++j) chunk.push_back(&frames[j]);
    nn::NoGradGuard guard;
    auto tokens = model.quantize(model.encode(model.embed(chunk)));
    used.insert(tokens.indices.begin(), tokens.indices.end());
    auto recon = model.logits_to_grids(model.decode(tokens.quantized));
    for (std::size_t j = 0; j < chunk.size(); ++j) acc.add(recon[j], *chunk[j]);
  }
  return {100.0 * acc.miou().miou, 100.0 * acc.iou(), static_cast<std::int64_t>(used.size())};
}

void init_codebook_kmeanspp(Tokenizer& model, std::span<const OccGrid* const> frames, Rng& rng) {
  if (frames.empty()) return;
  Tensor latent;
  {
    nn::NoGradGuard guard;
    latent = model.encode(model.embed(frames));
  }
  const std::int64_t C = latent.dim(3), S = latent.numel() / C;
  const auto z = latent.data();
  Tensor codebook = model.codebook();
  const std::int64_t N = codebook.dim(0);
  auto cb = codebook.data();
  std::vector<double> dist(static_cast<std::size_t>(S), std::numeric_limits<double>::infinity());
  std::int64_t pick = rng.uniform_int(0, S - 1);
  for (std::int64_t k = 0; k < N; ++k) {
    std::copy_n(z.data() + pick * C, C, cb.data() + k * C);
    double total = 0.0;
    for (std::int64_t s = 0; s < S; ++s) {
      double d = 0.0;
      for (std::int64_t c = 0; c < C; ++c) {
        const double diff = z[static_cast<std::size_t>(s * C + c)] - cb[static_cast<std::size_t>(k * C + c)];
        d += diff * diff;
      }
      dist[static_cast<std::size_t>(s)] = std::min(dist[static_cast<std::size_t>(s)], d);
      total += dist[static_cast<std::size_t>(s)];
    }
    if (total <= 0.0) {
      // Fewer distinct latents than codes: fill the rest with jittered copies.
      for (std::int64_t j = k + 1; j < N; ++j) {
        const auto src = rng.uniform_int(0, S - 1);
        for (std::int64_t c = 0; c < C; ++c) {
          cb[static_cast<std::size_t>(j * C + c)] = z[static_cast<std::size_t>(src * C + c)] + rng.uniform(-1e-3, 1e-3);
        }
      }
      break;
    }
    double r = rng.uniform() * total;
    pick = S - 1;
    for (std::int64_t s = 0; s < S; ++s) {
      r -= dist[static_cast<std::size_t>(s)];
      if (r < 0) {
        pick = s;
        break;
      }
    }
  }
}

std::vector<TokenizerEvalLine> train_tokenizer(Tokenizer& model, std::span<const OccGrid> train,
                                               std::span<const OccGrid> heldout, const TokenizerTrainConfig& config,
                                               const std::function<void(const TokenizerEvalLine&)>& on_eval) {
  if (train.empty()) throw ConfigError("train_tokenizer: empty training set");
  if (config.steps < 1 || config.batch < 1) throw ConfigError("train_tokenizer: steps and batch must be >= 1");
  const auto& tc = model.config();
  for (const auto& g : train) {
    if (!(g.dims() == tc.dims) || g.num_classes() != tc.num_classes) {
      throw ShapeError("train_tokenizer: frame dims/classes differ from the tokenizer config");
    }
  }
  const auto params = model.params().tensors();
  nn::OptimState opt;
  opt.hyper.weight_decay = config.weight_decay;
  Rng rng(mix_seed(config.seed, fnv1a("tokenizer.batches")));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::int64_t epoch = 0;
  const std::int64_t steps_per_epoch =
      (static_cast<std::int64_t>(train.size()) + config.batch - 1) / config.batch;
  const std::int64_t eval_every = config.eval_every > 0 ? config.eval_every : steps_per_epoch;
  const auto eval_set = config.eval_frames > 0 && static_cast<std::size_t>(config.eval_frames) < heldout.size()
                            ? heldout.first(static_cast<std::size_t>(config.eval_frames))
                            : heldout;

  if (config.codebook_init_frames > 0) {
    Rng init_rng(mix_seed(config.seed, fnv1a("tokenizer.codebook_init")));
    std::vector<const OccGrid*> frames;
    for (std::int64_t i = 0; i < config.codebook_init_frames; ++i) {
      frames.push_back(&train[static_cast<std::size_t>(init_rng.uniform_int(0, static_cast<std::int64_t>(train.size()) - 1))]);
    }
    init_codebook_kmeanspp(model, frames, init_rng);
  }

  std::vector<TokenizerEvalLine> log;
  LossBreakdown running;
  std::int64_t since = 0;
  for (std::int64_t step = 0; step < config.steps; ++step) {
    std::vector<const OccGrid*> batch;
    while (static_cast<std::int64_t>(batch.size()) < config.batch) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        cursor = 0;
        ++epoch;
      }
      batch.push_back(&train[order[cursor++]]);
    }
    const double lr = nn::cosine_anneal_lr(step, config.steps, config.lr, config.lr_min);
    model.params().zero_grad();
    auto latent = model.encode(model.embed(batch));
    auto tokens = model.quantize(latent);
    auto logits = model.decode(tokens.passthrough);
    LossBreakdown parts;
    auto loss = tokenizer_loss(logits, batch, latent, tokens, tc.lambda1, tc.beta, &parts);
    if (!std::isfinite(parts.total)) {
      throw DivergenceError("train_tokenizer: non-finite loss at step " + std::to_string(step) + " (ce " +
                            std::to_string(parts.cross_entropy) + ", lovasz " + std::to_string(parts.lovasz) + ")");
    }
    loss.backward();
    if (config.clip_norm > 0) nn::clip_grad_norm(params, config.clip_norm);
    nn::adamw_step(params, opt, lr);
    running.cross_entropy += parts.cross_entropy;
    running.lovasz += parts.lovasz;
    running.codebook += parts.codebook;
    running.commitment += parts.commitment;
    running.total += parts.total;
    ++since;

    if ((step + 1) % eval_every == 0 || step + 1 == config.steps) {
      TokenizerEvalLine line;
      line.epoch = epoch;
      line.step = step + 1;
      line.lr = lr;
      const double n = static_cast<double>(since);
      line.loss = {running.cross_entropy / n, running.lovasz / n, running.codebook / n, running.commitment / n,
                   running.total / n};
      if (!eval_set.empty()) {
        const auto score = evaluate_reconstruction(model, eval_set);
        line.miou = score.miou;
        line.iou = score.iou;
        line.codes_used = score.codes_used;
      }
      log.push_back(line);
      if (on_eval) on_eval(line);
      running = {};
      since = 0;
    }
  }
  return log;
}

}  // namespace occworld::tok
