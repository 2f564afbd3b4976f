#include "occworld/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "occworld/errors.hpp"

namespace occworld::eval {

namespace {

void check_pair(const OccGrid& pred, const OccGrid& gt, const char* what) {
  if (!(pred.dims() == gt.dims())) throw ShapeError(std::string(what) + ": grid dims differ");
}

double mean_over(const std::vector<ClassIou>& rows, const ClassFilter& filter, bool pred_empty) {
  double acc = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (!r.in_gt) continue;
    if (!filter.classes.empty() &&
        std::find(filter.classes.begin(), filter.classes.end(), r.cls) == filter.classes.end()) {
      continue;
    }
    acc += r.iou();
    ++n;
  }
  if (n == 0) return pred_empty ? 1.0 : 0.0;
  return acc / n;
}

}  // namespace

double iou_binary(const OccGrid& pred, const OccGrid& gt) {
  check_pair(pred, gt, "iou_binary");
  std::int64_t inter = 0, uni = 0;
  const auto a = pred.labels(), b = gt.labels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SemanticIou miou_semantic(const OccGrid& pred, const OccGrid& gt, const ClassFilter& filter) {
  check_pair(pred, gt, "miou_semantic");
  if (pred.num_classes() != gt.num_classes()) throw ShapeError("miou_semantic: class counts differ");
  IouAccumulator acc(gt.num_classes());
  acc.add(pred, gt);
  return acc.miou(filter);
}

IouAccumulator::IouAccumulator(std::uint32_t num_classes)
    : num_classes_(num_classes), inter_(num_classes, 0), pred_count_(num_classes, 0), gt_count_(num_classes, 0) {}

void IouAccumulator::add(const OccGrid& pred, const OccGrid& gt) {
  check_pair(pred, gt, "IouAccumulator");
  if (pred.num_classes() > num_classes_ || gt.num_classes() > num_classes_) {
    throw ShapeError("IouAccumulator: grid has more classes than the accumulator");
  }
  const auto a = pred.labels(), b = gt.labels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++pred_count_[a[i]];
    ++gt_count_[b[i]];
    if (a[i] == b[i]) ++inter_[a[i]];
    const bool pa = a[i] != 0, pb = b[i] != 0;
    occ_inter_ += pa && pb;
    occ_union_ += pa || pb;
  }
  ++pairs_;
}

double IouAccumulator::iou() const {
  return occ_union_ == 0 ? 1.0 : static_cast<double>(occ_inter_) / static_cast<double>(occ_union_);
}

SemanticIou IouAccumulator::miou(const ClassFilter& filter) const {
  SemanticIou out;
  bool pred_empty = true;
  for (std::uint32_t c = 1; c < num_classes_; ++c) {
    ClassIou r;
    r.cls = c;
    r.intersection = inter_[c];
    r.union_ = pred_count_[c] + gt_count_[c] - inter_[c];
    r.in_gt = gt_count_[c] > 0;
    if (pred_count_[c] > 0) pred_empty = false;
    out.per_class.push_back(r);
  }
  out.miou = mean_over(out.per_class, filter, pred_empty);
  return out;
}

std::vector<double> l2_error(const Trajectory& pred, const Trajectory& gt, std::span<const int> horizons,
                             L2Mode mode) {
  std::vector<double> out;
  for (int h : horizons) {
    if (h < 1) throw LengthError("l2_error: horizons are 1-based frame indices");
    if (static_cast<std::size_t>(h) > pred.size() || static_cast<std::size_t>(h) > gt.size()) {
      throw LengthError("l2_error: trajectory shorter than horizon " + std::to_string(h));
    }
    auto dist = [&](int k) {
      const auto& a = pred.waypoints[static_cast<std::size_t>(k - 1)];
      const auto& b = gt.waypoints[static_cast<std::size_t>(k - 1)];
      return std::hypot(a.x - b.x, a.y - b.y);
    };
    if (mode == L2Mode::kAtHorizon) {
      out.push_back(dist(h));
    } else {
      double acc = 0;
      for (int k = 1; k <= h; ++k) acc += dist(k);
      out.push_back(acc / h);
    }
  }
  return out;
}

namespace {

constexpr double kTouch = 1e-9;  // closed-set slack for boundary contact

// Separating-axis test between a rotated rectangle and an axis-aligned box;
// touching counts as overlap.
bool overlaps(double cx, double cy, double c, double s, double hl, double hw, double x0, double x1, double y0,
              double y1) {
  // Rectangle extent along the world axes.
  const double ex = std::abs(c) * hl + std::abs(s) * hw;
  const double ey = std::abs(s) * hl + std::abs(c) * hw;
  if (cx + ex < x0 - kTouch || cx - ex > x1 + kTouch) return false;
  if (cy + ey < y0 - kTouch || cy - ey > y1 + kTouch) return false;
  // Box extent along the rectangle's axes.
  const double bx = 0.5 * (x0 + x1) - cx, by = 0.5 * (y0 + y1) - cy;
  const double hx = 0.5 * (x1 - x0), hy = 0.5 * (y1 - y0);
  const double u = c * bx + s * by, v = -s * bx + c * by;
  const double eu = std::abs(c) * hx + std::abs(s) * hy;
  const double ev = std::abs(s) * hx + std::abs(c) * hy;
  if (std::abs(u) > hl + eu + kTouch) return false;
  if (std::abs(v) > hw + ev + kTouch) return false;
  return true;
}

}  // namespace

std::vector<bool> collisions(const Trajectory& pred, const Trajectory& gt, std::span<const OccGrid> gt_future,
                             const CollisionParams& params) {
  const std::size_t n = pred.size();
  if (gt_future.size() < n || gt.size() < n) throw LengthError("collision: missing ground-truth frame");
  std::vector<bool> hit(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& grid = gt_future[k];
    const auto& dims = grid.dims();
    const double vs = grid.voxel_size();
    double heading = 0.0;
    if (k + 1 < n) {
      const double dx = pred.waypoints[k + 1].x - pred.waypoints[k].x;
      const double dy = pred.waypoints[k + 1].y - pred.waypoints[k].y;
      if (std::hypot(dx, dy) > 1e-9) heading = std::atan2(dy, dx);
    }
    // Into the ego frame of gt frame k.
    const double psi = gt.headings[k];
    const double ox = pred.waypoints[k].x - gt.waypoints[k].x, oy = pred.waypoints[k].y - gt.waypoints[k].y;
    const double cx = std::cos(psi) * ox + std::sin(psi) * oy;
    const double cy = -std::sin(psi) * ox + std::cos(psi) * oy;
    const double th = heading - psi, c = std::cos(th), s = std::sin(th);
    const double hl = params.length / 2, hw = params.width / 2;
    const double ex = std::abs(c) * hl + std::abs(s) * hw, ey = std::abs(s) * hl + std::abs(c) * hw;
    const auto cell = [&](double v, std::int64_t extent) { return static_cast<std::int64_t>(std::floor(v / vs + extent / 2.0)); };
    const auto h0 = std::max<std::int64_t>(0, cell(cx - ex, dims.h) - 1), h1 = std::min(dims.h - 1, cell(cx + ex, dims.h) + 1);
    const auto w0 = std::max<std::int64_t>(0, cell(cy - ey, dims.w) - 1), w1 = std::min(dims.w - 1, cell(cy + ey, dims.w) + 1);
    std::int64_t layers = 0;
    while (layers < dims.d && static_cast<double>(layers) * vs < params.max_height - kTouch) ++layers;
    for (std::int64_t h = h0; h <= h1 && !hit[k]; ++h) {
      for (std::int64_t w = w0; w <= w1 && !hit[k]; ++w) {
        bool obstacle = false;
        for (std::int64_t d = 0; d < layers && !obstacle; ++d) {
          const auto l = grid.at(h, w, d);
          obstacle = std::find(params.obstacle_classes.begin(), params.obstacle_classes.end(), l) !=
                     params.obstacle_classes.end();
        }
        if (!obstacle) continue;
        const double x0 = (static_cast<double>(h) - dims.h / 2.0) * vs, y0 = (static_cast<double>(w) - dims.w / 2.0) * vs;
        if (overlaps(cx, cy, c, s, hl, hw, x0, x0 + vs, y0, y0 + vs)) hit[k] = true;
      }
    }
  }
  return hit;
}

std::vector<double> collision_rate(std::span<const std::vector<bool>> per_sample, std::span<const int> horizons) {
  std::vector<double> out;
  for (int h : horizons) {
    if (h < 1) throw LengthError("collision_rate: horizons are 1-based frame indices");
    std::int64_t hits = 0;
    for (const auto& flags : per_sample) {
      if (flags.size() < static_cast<std::size_t>(h)) throw LengthError("collision_rate: sample shorter than horizon");
      hits += std::any_of(flags.begin(), flags.begin() + h, [](bool b) { return b; });
    }
    out.push_back(per_sample.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(per_sample.size()));
  }
  return out;
}

std::vector<OccGrid> copy_paste_baseline(std::span<const OccGrid> history, int steps) {
  if (history.empty()) throw LengthError("copy_paste_baseline: empty history");
  return std::vector<OccGrid>(static_cast<std::size_t>(std::max(steps, 0)), history.back());
}

}  // namespace occworld::eval
