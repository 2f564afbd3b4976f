#include "occworld/world/rollout.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "occworld/errors.hpp"
#include "occworld/rng.hpp"
#include "occworld/world/train.hpp"

namespace occworld::world {

Decoding Decoding::parse(const std::string& text, std::uint64_t seed) {
  if (text == "argmax") return {0.0, seed};
  const std::string prefix = "sample:";
  if (text.rfind(prefix, 0) == 0) {
    const auto body = text.substr(prefix.size());
    double t = 0.0;
    const auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), t);
    if (ec == std::errc{} && end == body.data() + body.size() && std::isfinite(t) && t > 0.0) return {t, seed};
  }
  throw ConfigError("world.decoding must be 'argmax' or 'sample:<temperature > 0>', got '" + text + "'");
}

std::string Decoding::str() const {
  if (temperature <= 0.0) return "argmax";
  std::ostringstream os;
  os << "sample:" << temperature;
  return os.str();
}

namespace {

std::int64_t pick_code(std::span<const double> logits, const Decoding& dec, Rng& rng) {
  if (dec.temperature <= 0.0) return std::max_element(logits.begin(), logits.end()) - logits.begin();
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp((logits[i] - top) / dec.temperature);
  double r = rng.uniform() * z;
  for (std::size_t i = 0; i < p.size(); ++i) {
    r -= p[i];
    if (r < 0) return static_cast<std::int64_t>(i);
  }
  return static_cast<std::int64_t>(p.size()) - 1;
}

}  // namespace

RolloutResult rollout_tokens(const WorldModel& model, const tok::Tokenizer& tokenizer,
                             std::span<const std::vector<std::int64_t>> history, std::span<const EgoPose> poses,
                             int steps, const Decoding& decoding) {
  const auto& wc = model.config();
  if (static_cast<int>(history.size()) != wc.history_frames || poses.size() != history.size()) {
    throw ShapeError("rollout: expected " + std::to_string(wc.history_frames) + " history frames, got " +
                     std::to_string(history.size()) + " (" + std::to_string(poses.size()) + " poses)");
  }
  if (steps < 1) throw ConfigError("rollout: steps must be >= 1");
  if (wc.history_frames + steps > wc.capacity()) {
    throw ConfigError("rollout: history " + std::to_string(wc.history_frames) + " + " + std::to_string(steps) +
                      " steps exceed the temporal position capacity " + std::to_string(wc.capacity()));
  }
  std::vector<std::vector<std::int64_t>> ctx(history.begin(), history.end());
  std::vector<EgoPose> ctx_poses(poses.begin(), poses.end());
  Rng rng(mix_seed(decoding.seed, fnv1a("world.rollout")));
  RolloutResult out;
  std::vector<Vec2> disp;
  nn::NoGradGuard guard;
  for (int k = 0; k < steps; ++k) {
    const auto in = window_inputs(tokenizer, ctx, ctx_poses);
    const auto pred = model.forward(in.scene, in.motion, in.batch, in.frames);
    const auto N = static_cast<std::size_t>(pred.logits.dim(2));
    const auto M = static_cast<std::size_t>(pred.logits.dim(1));
    const auto last = static_cast<std::size_t>(in.frames - 1);
    const auto lg = pred.logits.data().subspan(last * M * N, M * N);
    std::vector<std::int64_t> codes(M);
    for (std::size_t s = 0; s < M; ++s) codes[s] = pick_code(lg.subspan(s * N, N), decoding, rng);
    const Vec2 d{pred.displacement.data()[2 * last], pred.displacement.data()[2 * last + 1]};
    disp.push_back(d);

    // The next pose only matters through its motion relative to the current
    // one, so compose it in the current frame.
    const auto& cur = ctx_poses.back();
    const double c = std::cos(static_cast<double>(cur.yaw)), s = std::sin(static_cast<double>(cur.yaw));
    EgoPose next;
    next.x = static_cast<float>(cur.x + c * d.x - s * d.y);
    next.y = static_cast<float>(cur.y + s * d.x + c * d.y);
    next.yaw = static_cast<float>(std::remainder(static_cast<double>(cur.yaw) + heading_change(d), 2.0 * M_PI));
    out.indices.push_back(codes);
    ctx.push_back(std::move(codes));
    ctx_poses.push_back(next);
    ctx.erase(ctx.begin());
    ctx_poses.erase(ctx_poses.begin());
  }
  for (const auto& codes : out.indices) out.grids.push_back(tokenizer.decode_indices(codes, 1).front());
  out.trajectory = trajectory_from_displacements(disp);
  return out;
}

RolloutResult rollout(const WorldModel& model, const tok::Tokenizer& tokenizer, std::span<const OccFrame> history,
                      int steps, const Decoding& decoding) {
  if (static_cast<int>(history.size()) != model.config().history_frames) {
    throw ShapeError("rollout: expected " + std::to_string(model.config().history_frames) + " history frames, got " +
                     std::to_string(history.size()));
  }
  std::vector<const OccGrid*> grids;
  std::vector<EgoPose> poses;
  for (const auto& f : history) {
    grids.push_back(&f.grid);
    poses.push_back(f.pose);
  }
  const auto flat = tokenizer.tokenize(grids);
  const auto sites = flat.size() / history.size();
  std::vector<std::vector<std::int64_t>> idx;
  for (std::size_t i = 0; i < history.size(); ++i) {
    idx.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i * sites),
                     flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * sites));
  }
  return rollout_tokens(model, tokenizer, idx, poses, steps, decoding);
}

}  // namespace occworld::world
