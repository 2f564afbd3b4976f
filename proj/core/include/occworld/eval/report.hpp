#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "occworld/eval/metrics.hpp"

namespace occworld::eval {

/// What a method predicts for one history window.
struct Forecast {
  std::vector<OccGrid> grids;
  std::vector<Vec2> displacements;  // each in the ego frame of the previous step
};

using Forecaster = std::function<Forecast(std::span<const OccFrame> history, int steps)>;

/// Last history grid repeated, zero ego motion.
Forecast copy_paste_forecast(std::span<const OccFrame> history, int steps);

struct EvalOptions {
  int history_frames = 5;
  int future_frames = 6;
  std::vector<int> horizons{2, 4, 6};  // 1-based future frames
  std::vector<std::string> labels{"1s", "2s", "3s"};
  std::vector<L2Mode> l2_modes{L2Mode::kAtHorizon};
  CollisionParams collision;
  int threads = 1;
};

struct ForecastReport {
  std::vector<std::string> labels;
  std::vector<double> miou, iou;  // percent, one per horizon
  double avg_miou = 0.0, avg_iou = 0.0;
  /// class_iou[h][c - 1] for non-free class c, percent; class_in_gt marks the
  /// classes that enter the mean at that horizon.
  std::vector<std::vector<double>> class_iou;
  std::vector<std::vector<bool>> class_in_gt;
  std::int64_t samples = 0;
};

struct PlanReport {
  L2Mode mode = L2Mode::kAtHorizon;
  std::vector<std::string> labels;
  std::vector<double> l2, collision;  // meters, percent
  double avg_l2 = 0.0, avg_collision = 0.0;
  std::int64_t samples = 0;
};

struct EvalReport {
  std::string method;
  ForecastReport forecast;
  std::vector<PlanReport> plan;  // one per requested L2 mode
};

/// Scores `forecaster` on the first history_frames + future_frames frames of
/// every sequence. Forecast scores pool intersections and unions over the
/// whole set per horizon; planning uses the ground-truth trajectory in the
/// frame of the last history frame. Results do not depend on `threads`.
/// Throws LengthError for a sequence that is too short and ShapeError when a
/// forecast has the wrong number of frames or dims.
EvalReport evaluate(std::span<const OccSequence> sequences, const Forecaster& forecaster, const EvalOptions& options,
                    const std::string& method);

std::string mode_name(L2Mode mode);

/// Line-oriented tables, one row per method.
std::string format_tables(std::span<const EvalReport> reports, const std::vector<std::string>& class_names = {});

/// "method.metric.horizon=value" lines, e.g. "world.miou.1s=23.400000".
std::string format_keys(std::span<const EvalReport> reports);

}  // namespace occworld::eval
