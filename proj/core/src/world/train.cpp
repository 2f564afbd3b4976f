#include "occworld/world/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "occworld/errors.hpp"
#include "occworld/eval/metrics.hpp"
#include "occworld/numerics/ops.hpp"
#include "occworld/numerics/optim.hpp"
#include "occworld/rng.hpp"

namespace occworld::world {

Tensor world_loss(const Tensor& logits, std::span<const std::int32_t> targets, const Tensor& displacement,
                  std::span<const Vec2> gt_displacement, double lambda2, WorldLossBreakdown* breakdown) {
  if (logits.rank() != 3) throw ShapeError("world_loss: logits must be [n, M, N], got " + nn::shape_str(logits.shape()));
  const auto n = logits.dim(0), M = logits.dim(1), N = logits.dim(2);
  if (static_cast<std::int64_t>(targets.size()) != n * M) {
    throw ShapeError("world_loss: " + std::to_string(targets.size()) + " targets for " + std::to_string(n) +
                     " positions of " + std::to_string(M) + " sites");
  }
  if (displacement.rank() != 2 || displacement.dim(0) != n || displacement.dim(1) != 2 ||
      static_cast<std::int64_t>(gt_displacement.size()) != n) {
    throw ShapeError("world_loss: displacement " + nn::shape_str(displacement.shape()) + " with " +
                     std::to_string(gt_displacement.size()) + " targets for " + std::to_string(n) + " positions");
  }
  const Tensor ce = nn::cross_entropy(nn::reshape(logits, {n * M, N}), targets);
  std::vector<double> gt;
  gt.reserve(static_cast<std::size_t>(2 * n));
  for (const auto& v : gt_displacement) {
    gt.push_back(v.x);
    gt.push_back(v.y);
  }
  const Tensor diff = nn::sub(displacement, Tensor({n, 2}, std::move(gt)));
  // Mean over positions of the squared Euclidean error.
  const Tensor ego = nn::scale(nn::mean(nn::mul(diff, diff)), 2.0 * lambda2);
  const Tensor total = nn::add(ce, ego);
  if (breakdown) *breakdown = {ce.item(), ego.item(), total.item()};
  return total;
}

std::vector<TokenizedSequence> tokenize_sequences(const tok::Tokenizer& tokenizer, std::span<const OccSequence> seqs,
                                                  std::int64_t batch) {
  const auto sites = static_cast<std::size_t>(tokenizer.config().token_h() * tokenizer.config().token_w());
  std::vector<TokenizedSequence> out;
  out.reserve(seqs.size());
  for (const auto& seq : seqs) {
    TokenizedSequence ts;
    for (std::size_t i = 0; i < seq.frames.size(); i += static_cast<std::size_t>(batch)) {
      std::vector<const OccGrid*> chunk;
      for (std::size_t j = i; j < std::min(seq.frames.size(), i + static_cast<std::size_t>(batch)); ++j) {
        chunk.push_back(&seq.frames[j].grid);
      }
      const auto idx = tokenizer.tokenize(chunk);
      for (std::size_t j = 0; j < chunk.size(); ++j) {
        ts.indices.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(j * sites),
                                idx.begin() + static_cast<std::ptrdiff_t>((j + 1) * sites));
      }
    }
    for (const auto& f : seq.frames) ts.poses.push_back(f.pose);
    out.push_back(std::move(ts));
  }
  return out;
}

std::vector<WindowRef> enumerate_windows(std::span<const TokenizedSequence> seqs, std::int64_t frames) {
  std::vector<WindowRef> out;
  const auto need = static_cast<std::size_t>(frames + 1);
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    if (seqs[s].size() < need) continue;
    for (std::size_t start = 0; start + need <= seqs[s].size(); ++start) out.push_back({s, start});
  }
  return out;
}

namespace {

void append_window(const tok::Tokenizer& tokenizer, std::span<const std::vector<std::int64_t>> indices,
                   std::span<const EgoPose> poses, std::vector<std::int64_t>& codes, std::vector<PoseDelta>& motion) {
  const auto sites = static_cast<std::size_t>(tokenizer.config().token_h() * tokenizer.config().token_w());
  for (const auto& f : indices) {
    if (f.size() != sites) throw ShapeError("world: frame has " + std::to_string(f.size()) + " codes, expected " + std::to_string(sites));
    codes.insert(codes.end(), f.begin(), f.end());
  }
  const auto m = ego_motion_inputs(poses);
  motion.insert(motion.end(), m.begin(), m.end());
}

WorldBatch finish(const tok::Tokenizer& tokenizer, std::int64_t batch, std::int64_t frames,
                  const std::vector<std::int64_t>& codes, const std::vector<PoseDelta>& motion) {
  WorldBatch out;
  out.batch = batch;
  out.frames = frames;
  nn::NoGradGuard guard;
  out.scene = tokenizer.lookup(codes, batch * frames).detach();
  out.motion = motion_tensor(motion);
  return out;
}

}  // namespace

WorldBatch make_batch(const tok::Tokenizer& tokenizer, std::span<const TokenizedSequence> seqs,
                      std::span<const WindowRef> windows, std::int64_t frames) {
  std::vector<std::int64_t> codes;
  std::vector<PoseDelta> motion;
  std::vector<std::int32_t> targets;
  std::vector<Vec2> disp;
  for (const auto& w : windows) {
    const auto& s = seqs[w.sequence];
    if (w.start + static_cast<std::size_t>(frames) + 1 > s.size()) {
      throw LengthError("make_batch: window at " + std::to_string(w.start) + " runs past a sequence of " +
                        std::to_string(s.size()) + " frames");
    }
    const auto T = static_cast<std::size_t>(frames);
    append_window(tokenizer, std::span(s.indices).subspan(w.start, T), std::span(s.poses).subspan(w.start, T), codes,
                  motion);
    for (std::size_t k = 1; k <= T; ++k) {
      for (auto c : s.indices[w.start + k]) targets.push_back(static_cast<std::int32_t>(c));
      const auto d = relative_motion(s.poses[w.start + k - 1], s.poses[w.start + k]);
      disp.push_back({d.dx, d.dy});
    }
  }
  auto out = finish(tokenizer, static_cast<std::int64_t>(windows.size()), frames, codes, motion);
  out.targets = std::move(targets);
  out.displacement = std::move(disp);
  return out;
}

WorldBatch window_inputs(const tok::Tokenizer& tokenizer, std::span<const std::vector<std::int64_t>> indices,
                         std::span<const EgoPose> poses) {
  if (indices.size() != poses.size() || indices.empty()) {
    throw ShapeError("window_inputs: " + std::to_string(indices.size()) + " code frames vs " +
                     std::to_string(poses.size()) + " poses");
  }
  std::vector<std::int64_t> codes;
  std::vector<PoseDelta> motion;
  append_window(tokenizer, indices, poses, codes, motion);
  return finish(tokenizer, 1, static_cast<std::int64_t>(indices.size()), codes, motion);
}

TeacherForcedScore evaluate_teacher_forced(const WorldModel& model, const tok::Tokenizer& tokenizer,
                                           std::span<const TokenizedSequence> seqs, std::span<const WindowRef> windows) {
  const std::int64_t T = model.config().history_frames;
  std::int64_t correct = 0, total = 0, positions = 0;
  double l2 = 0.0;
  std::vector<std::int64_t> pred_codes, target_codes;
  nn::NoGradGuard guard;
  for (const auto& w : windows) {
    const auto b = make_batch(tokenizer, seqs, std::span(&w, 1), T);
    const auto out = model.forward(b.scene, b.motion, b.batch, b.frames);
    const auto N = out.logits.dim(2);
    const auto lg = out.logits.data();
    const auto sites = static_cast<std::size_t>(out.logits.dim(1));
    const auto last = b.targets.size() - sites;
    for (std::size_t r = 0; r < b.targets.size(); ++r) {
      const auto row = lg.subspan(r * static_cast<std::size_t>(N), static_cast<std::size_t>(N));
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      correct += best == b.targets[r];
      ++total;
      if (r >= last) {
        pred_codes.push_back(best);
        target_codes.push_back(b.targets[r]);
      }
    }
    const auto d = out.displacement.data();
    for (std::size_t k = 0; k < b.displacement.size(); ++k) {
      l2 += std::hypot(d[2 * k] - b.displacement[k].x, d[2 * k + 1] - b.displacement[k].y);
      ++positions;
    }
  }
  if (total == 0) return {};
  // Decoded in small chunks; full-resolution logits are large.
  eval::IouAccumulator acc(tokenizer.config().num_classes);
  const std::size_t sites = pred_codes.size() / windows.size();
  for (std::size_t start = 0; start < windows.size(); start += 4) {
    const std::size_t n = std::min<std::size_t>(4, windows.size() - start);
    const auto pred = tokenizer.decode_indices(std::span(pred_codes).subspan(start * sites, n * sites), static_cast<std::int64_t>(n));
    const auto gt = tokenizer.decode_indices(std::span(target_codes).subspan(start * sites, n * sites), static_cast<std::int64_t>(n));
    for (std::size_t i = 0; i < n; ++i) acc.add(pred[i], gt[i]);
  }
  return {100.0 * static_cast<double>(correct) / static_cast<double>(total), l2 / static_cast<double>(positions),
          100.0 * acc.miou().miou};
}

std::vector<WorldEvalLine> train_world(WorldModel& model, const tok::Tokenizer& tokenizer,
                                       std::span<const OccSequence> train, std::span<const OccSequence> heldout,
                                       const WorldTrainConfig& config,
                                       const std::function<void(const WorldEvalLine&)>& on_eval) {
  if (config.steps < 1 || config.batch < 1) throw ConfigError("train_world: steps and batch must be >= 1");
  const auto& wc = model.config();
  const auto& tc = tokenizer.config();
  if (tc.token_h() != wc.token_h || tc.token_w() != wc.token_w || tc.C != wc.C || tc.N != wc.N) {
    throw ShapeError("train_world: tokenizer grid/codebook does not match the world model config");
  }
  for (const auto& s : train) {
    for (const auto& f : s.frames) {
      if (!(f.grid.dims() == tc.dims) || f.grid.num_classes() != tc.num_classes) {
        throw ShapeError("train_world: sequence " + s.scene_id + " dims/classes differ from the tokenizer config");
      }
    }
  }
  const std::int64_t T = wc.history_frames;
  const auto train_tok = tokenize_sequences(tokenizer, train);
  const auto held_tok = tokenize_sequences(tokenizer, heldout);
  const auto windows = enumerate_windows(train_tok, T);
  if (windows.empty()) {
    throw LengthError("train_world: no training sequence has the " + std::to_string(T + 1) + " frames a window needs");
  }
  auto held_windows = enumerate_windows(held_tok, T);
  if (config.eval_windows > 0 && held_windows.size() > static_cast<std::size_t>(config.eval_windows)) {
    // Spread the cap evenly over the held-out set.
    std::vector<WindowRef> picked;
    const auto n = static_cast<std::size_t>(config.eval_windows);
    for (std::size_t i = 0; i < n; ++i) picked.push_back(held_windows[i * held_windows.size() / n]);
    held_windows = std::move(picked);
  }

  const auto params = model.params().tensors();
  nn::OptimState opt;
  opt.hyper.weight_decay = config.weight_decay;
  Rng rng(mix_seed(config.seed, fnv1a("world.batches")));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::int64_t epoch = 0;
  const std::int64_t steps_per_epoch = (static_cast<std::int64_t>(windows.size()) + config.batch - 1) / config.batch;
  const std::int64_t eval_every = config.eval_every > 0 ? config.eval_every : steps_per_epoch;

  std::vector<WorldEvalLine> log;
  WorldLossBreakdown running;
  std::int64_t since = 0;
  for (std::int64_t step = 0; step < config.steps; ++step) {
    std::vector<WindowRef> picked;
    while (static_cast<std::int64_t>(picked.size()) < config.batch) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        cursor = 0;
        ++epoch;
      }
      picked.push_back(windows[order[cursor++]]);
    }
    const double lr = nn::cosine_anneal_lr(step, config.steps, config.lr, config.lr_min);
    const auto b = make_batch(tokenizer, train_tok, picked, T);
    model.params().zero_grad();
    const auto out = model.forward(b.scene, b.motion, b.batch, b.frames);
    WorldLossBreakdown parts;
    const auto loss = world_loss(out.logits, b.targets, out.displacement, b.displacement, wc.lambda2, &parts);
    if (!std::isfinite(parts.total)) {
      throw DivergenceError("train_world: non-finite loss at step " + std::to_string(step) + " (ce " +
                            std::to_string(parts.cross_entropy) + ", ego " + std::to_string(parts.ego) + ")");
    }
    loss.backward();
    if (config.clip_norm > 0) nn::clip_grad_norm(params, config.clip_norm);
    nn::adamw_step(params, opt, lr);
    running.cross_entropy += parts.cross_entropy;
    running.ego += parts.ego;
    running.total += parts.total;
    ++since;

    if ((step + 1) % eval_every == 0 || step + 1 == config.steps) {
      WorldEvalLine line;
      line.epoch = epoch;
      line.step = step + 1;
      line.lr = lr;
      const double n = static_cast<double>(since);
      line.loss = {running.cross_entropy / n, running.ego / n, running.total / n};
      if (!held_windows.empty()) {
        const auto score = evaluate_teacher_forced(model, tokenizer, held_tok, held_windows);
        line.token_accuracy = score.token_accuracy;
        line.ego_l2 = score.ego_l2;
        line.miou = score.miou;
      }
      log.push_back(line);
      if (on_eval) on_eval(line);
      running = {};
      since = 0;
    }
  }
  return log;
}

}  // namespace occworld::world
