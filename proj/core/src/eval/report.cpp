#include "occworld/eval/report.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "occworld/errors.hpp"
#include "occworld/parallel.hpp"

namespace occworld::eval {

Forecast copy_paste_forecast(std::span<const OccFrame> history, int steps) {
  std::vector<OccGrid> grids;
  for (const auto& f : history) grids.push_back(f.grid);
  return {copy_paste_baseline(grids, steps), std::vector<Vec2>(static_cast<std::size_t>(steps))};
}

namespace {

struct Sample {
  Forecast forecast;
  Trajectory pred, gt;
};

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string key_name(L2Mode mode) { return mode == L2Mode::kAtHorizon ? "l2" : "l2_avg"; }

}  // namespace

std::string mode_name(L2Mode mode) { return mode == L2Mode::kAtHorizon ? "at-horizon" : "averaged-up-to-horizon"; }

EvalReport evaluate(std::span<const OccSequence> sequences, const Forecaster& forecaster, const EvalOptions& opt,
                    const std::string& method) {
  if (opt.horizons.size() != opt.labels.size()) throw ConfigError("evaluate: one label per horizon is required");
  for (int h : opt.horizons) {
    if (h < 1 || h > opt.future_frames) {
      throw ConfigError("evaluate: horizon " + std::to_string(h) + " outside 1.." + std::to_string(opt.future_frames));
    }
  }
  const auto H = static_cast<std::size_t>(opt.history_frames), F = static_cast<std::size_t>(opt.future_frames);
  for (const auto& s : sequences) {
    if (s.frames.size() < H + F) {
      throw LengthError("evaluate: sequence " + s.scene_id + " has " + std::to_string(s.frames.size()) +
                        " frames, need " + std::to_string(H + F));
    }
  }
  std::vector<Sample> samples(sequences.size());
  parallel_for(sequences.size(), opt.threads, [&](std::size_t i) {
    const auto& seq = sequences[i];
    const auto history = std::span(seq.frames).first(H);
    auto fc = forecaster(history, opt.future_frames);
    if (fc.grids.size() != F || fc.displacements.size() != F) {
      throw ShapeError("evaluate: " + method + " returned " + std::to_string(fc.grids.size()) + " grids and " +
                       std::to_string(fc.displacements.size()) + " displacements for " + std::to_string(F) + " steps");
    }
    for (std::size_t k = 0; k < F; ++k) {
      const auto& gt = seq.frames[H + k].grid;
      if (!(fc.grids[k].dims() == gt.dims()) || fc.grids[k].num_classes() != gt.num_classes()) {
        throw ShapeError("evaluate: forecast dims/classes differ from sequence " + seq.scene_id);
      }
    }
    std::vector<EgoPose> poses;
    for (std::size_t k = H - 1; k < H + F; ++k) poses.push_back(seq.frames[k].pose);
    samples[i].pred = trajectory_from_displacements(fc.displacements);
    samples[i].gt = trajectory_from_poses(poses);
    samples[i].forecast = std::move(fc);
  });

  EvalReport report;
  report.method = method;
  auto& fr = report.forecast;
  fr.labels = opt.labels;
  fr.samples = static_cast<std::int64_t>(samples.size());
  const std::uint32_t K = sequences.empty() ? kDefaultNumClasses : sequences.front().frames.front().grid.num_classes();
  for (int h : opt.horizons) {
    IouAccumulator acc(K);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      acc.add(samples[i].forecast.grids[static_cast<std::size_t>(h - 1)],
              sequences[i].frames[H + static_cast<std::size_t>(h - 1)].grid);
    }
    const auto sem = acc.miou();
    fr.miou.push_back(100.0 * sem.miou);
    fr.iou.push_back(100.0 * acc.iou());
    std::vector<double> cls;
    std::vector<bool> present;
    for (const auto& c : sem.per_class) {
      cls.push_back(100.0 * c.iou());
      present.push_back(c.in_gt);
    }
    fr.class_iou.push_back(std::move(cls));
    fr.class_in_gt.push_back(std::move(present));
  }
  fr.avg_miou = mean(fr.miou);
  fr.avg_iou = mean(fr.iou);

  std::vector<std::vector<bool>> hits(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto future = std::span(sequences[i].frames).subspan(H, F);
    std::vector<OccGrid> grids;
    for (const auto& f : future) grids.push_back(f.grid);
    hits[i] = collisions(samples[i].pred, samples[i].gt, grids, opt.collision);
  }
  const auto col = samples.empty() ? std::vector<double>(opt.horizons.size(), 0.0) : collision_rate(hits, opt.horizons);
  for (auto mode : opt.l2_modes) {
    PlanReport pr;
    pr.mode = mode;
    pr.labels = opt.labels;
    pr.samples = static_cast<std::int64_t>(samples.size());
    pr.l2.assign(opt.horizons.size(), 0.0);
    for (const auto& s : samples) {
      const auto e = l2_error(s.pred, s.gt, opt.horizons, mode);
      for (std::size_t j = 0; j < e.size(); ++j) pr.l2[j] += e[j];
    }
    if (!samples.empty()) {
      for (auto& v : pr.l2) v /= static_cast<double>(samples.size());
    }
    pr.collision = col;
    pr.avg_l2 = mean(pr.l2);
    pr.avg_collision = mean(pr.collision);
    report.plan.push_back(std::move(pr));
  }
  return report;
}

std::string format_tables(std::span<const EvalReport> reports, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  if (reports.empty()) return {};
  const auto& labels = reports.front().forecast.labels;
  std::size_t name_w = 8;
  for (const auto& r : reports) name_w = std::max(name_w, r.method.size() + 2);

  os << "Forecast (%)\n" << pad("method", name_w);
  for (const auto& l : labels) os << pad("mIoU " + l, 10);
  os << pad("mIoU Avg", 10);
  for (const auto& l : labels) os << pad("IoU " + l, 10);
  os << "IoU Avg\n";
  for (const auto& r : reports) {
    os << pad(r.method, name_w);
    for (double v : r.forecast.miou) os << pad(fmt(v, 2), 10);
    os << pad(fmt(r.forecast.avg_miou, 2), 10);
    for (double v : r.forecast.iou) os << pad(fmt(v, 2), 10);
    os << fmt(r.forecast.avg_iou, 2) << "\n";
  }

  for (const auto& r : reports) {
    const auto& fr = r.forecast;
    if (fr.class_iou.empty()) continue;
    os << "\nPer-class IoU (%), " << r.method << "\n" << pad("class", 14);
    for (const auto& l : labels) os << pad(l, 9);
    os << "\n";
    for (std::size_t c = 0; c < fr.class_iou.front().size(); ++c) {
      const auto name = c + 1 < class_names.size() ? class_names[c + 1] : "class" + std::to_string(c + 1);
      os << pad(name, 14);
      for (std::size_t h = 0; h < fr.class_iou.size(); ++h) {
        os << pad(fr.class_in_gt[h][c] ? fmt(fr.class_iou[h][c], 2) : "-", 9);
      }
      os << "\n";
    }
  }

  for (std::size_t m = 0; m < reports.front().plan.size(); ++m) {
    os << "\nPlanning, L2 " << mode_name(reports.front().plan[m].mode) << "\n" << pad("method", name_w);
    for (const auto& l : labels) os << pad("L2 " + l, 9);
    os << pad("L2 Avg", 9);
    for (const auto& l : labels) os << pad("Col " + l, 9);
    os << "Col Avg\n";
    for (const auto& r : reports) {
      if (m >= r.plan.size()) continue;
      const auto& p = r.plan[m];
      os << pad(r.method, name_w);
      for (double v : p.l2) os << pad(fmt(v, 3), 9);
      os << pad(fmt(p.avg_l2, 3), 9);
      for (double v : p.collision) os << pad(fmt(v, 2), 9);
      os << fmt(p.avg_collision, 2) << "\n";
    }
  }
  return os.str();
}

std::string format_keys(std::span<const EvalReport> reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    const auto& fr = r.forecast;
    os << "[" << r.method << "]\n";
    os << "samples=" << fr.samples << "\n";
    auto series = [&](const std::string& metric, const std::vector<double>& v, double avg) {
      for (std::size_t i = 0; i < v.size(); ++i) os << metric << "." << fr.labels[i] << "=" << fmt(v[i]) << "\n";
      os << metric << ".avg=" << fmt(avg) << "\n";
    };
    series("miou", fr.miou, fr.avg_miou);
    series("iou", fr.iou, fr.avg_iou);
    for (const auto& p : r.plan) series(key_name(p.mode), p.l2, p.avg_l2);
    if (!r.plan.empty()) series("collision", r.plan.front().collision, r.plan.front().avg_collision);
  }
  return os.str();
}

}  // namespace occworld::eval
