// occworld command line: data generation, two-stage training, rollout,
// evaluation, rendering and gradient checks.
//
// Exit codes: 0 ok, 2 usage, 3 I/O, 4 divergence, 5 data mismatch, 6 check
// failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "occworld/artifacts.hpp"
#include "occworld/checks.hpp"
#include "occworld/config.hpp"
#include "occworld/dataset.hpp"
#include "occworld/errors.hpp"
#include "occworld/eval/report.hpp"
#include "occworld/numerics/tensor.hpp"
#include "occworld/parallel.hpp"
#include "occworld/render.hpp"
#include "occworld/tokenizer/train.hpp"
#include "occworld/world/rollout.hpp"
#include "occworld/world/train.hpp"

namespace fs = std::filesystem;
using namespace occworld;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kDivergence = 4, kMismatch = 5, kCheckFailed = 6 };

// Set by the subcommand callback that ran.
int g_result = kOk;

const std::vector<std::string> kClassNames{"free", "drivable", "sidewalk", "building", "vehicle", "pedestrian"};

// Options every subcommand shares. Precedence: defaults < --config file <
// --set pairs < dedicated flags.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out;
  std::uint64_t seed = 0;
  bool deterministic = false;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* det_opt = nullptr;

  void attach(CLI::App* cmd, const char* out_help) {
    cmd->add_option("--config", config_file, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
    out_opt = cmd->add_option("--out", out, out_help);
    seed_opt = cmd->add_option("--seed", seed, "run seed");
    det_opt = cmd->add_flag("--deterministic", deterministic, "single-threaded, bitwise reproducible");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (out_opt->count()) cfg.set("run.out_dir", out);
    if (seed_opt->count()) cfg.set("run.seed", std::to_string(seed));
    if (det_opt->count()) cfg.set("run.deterministic", "true");
    return cfg;
  }
};

template <typename T>
void apply(RunConfig& cfg, const CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count()) {
    std::ostringstream os;
    os << value;
    cfg.set(key, os.str());
  }
}

fs::path out_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.get("run.out_dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw IoError(std::string(what) + " directory not found: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

int threads_for(const RunConfig& cfg) {
  if (cfg.get_bool("run.deterministic")) return 1;
  return worker_count(static_cast<int>(cfg.get_int("run.threads")));
}

std::vector<OccGrid> grids_of(const std::vector<OccSequence>& seqs) {
  std::vector<OccGrid> out;
  for (const auto& s : seqs) {
    for (const auto& f : s.frames) out.push_back(f.grid);
  }
  return out;
}

void check_tokenizer_matches(const tok::Tokenizer& t, const Dataset& ds) {
  const auto& c = t.config();
  if (!(c.dims == ds.dims) || c.num_classes != ds.num_classes) {
    throw ValidationError("tokenizer expects " + grid_str(c.dims) + " grids with " + std::to_string(c.num_classes) +
                          " classes, dataset has " + grid_str(ds.dims) + " with " + std::to_string(ds.num_classes));
  }
}

void check_world_matches(const world::WorldModel& w, const tok::Tokenizer& t) {
  const auto& wc = w.config();
  const auto& tc = t.config();
  if (wc.token_h != tc.token_h() || wc.token_w != tc.token_w() || wc.C != tc.C || wc.N != tc.N) {
    throw ValidationError("world model and tokenizer disagree on the token grid or codebook");
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- gen-data --------------------------------------------------------------

struct GenData {
  Common common;
  std::int64_t scenes = 0, frames = 0;
  std::string grid, profile;
  CLI::Option *scenes_opt, *frames_opt, *grid_opt, *profile_opt;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("gen-data", "generate a synthetic dataset (.occseq files + manifest)");
    common.attach(cmd, "dataset directory");
    common.out_opt->required();
    scenes_opt = cmd->add_option("--scenes", scenes, "number of sequences");
    frames_opt = cmd->add_option("--frames", frames, "frames per sequence");
    grid_opt = cmd->add_option("--grid", grid, "grid extents HxWxD (default 64x64x8)");
    profile_opt = cmd->add_option("--profile", profile, "ego motion mix")->check(CLI::IsMember({"mixed", "constant-velocity"}));
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    apply(cfg, scenes_opt, "data.scenes", scenes);
    apply(cfg, frames_opt, "data.frames", frames);
    apply(cfg, grid_opt, "data.grid", grid);
    if (profile_opt->count() && profile == "constant-velocity") {
      cfg.set("data.p_lane_change", "0");
      cfg.set("data.p_turn", "0");
    }
    const auto dir = out_dir(cfg);
    const auto ds = generate_dataset(dir, cfg.get_int("data.scenes"), cfg.get_int("data.frames"), cfg.get_uint("run.seed"),
                                     parse_grid(cfg.get("data.grid")), cfg.scenario_mix());
    cfg.write_snapshot(dir / "resolved_config.txt");
    std::cout << "wrote " << ds.entries.size() << " sequences to " << dir.string() << "\n";
    return kOk;
  }
};

// ---- train-tokenizer -------------------------------------------------------

struct TrainTokenizer {
  Common common;
  std::string data;
  std::int64_t steps = 0;
  CLI::Option* steps_opt;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("train-tokenizer", "stage 1: fit the scene tokenizer");
    common.attach(cmd, "checkpoint directory");
    cmd->add_option("--data", data, "dataset directory")->required();
    steps_opt = cmd->add_option("--steps", steps, "optimizer steps");
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    apply(cfg, steps_opt, "tokenizer.steps", steps);
    if (common.seed_opt->count()) cfg.set("tokenizer.seed", std::to_string(common.seed));
    require_dir(data, "dataset");
    const auto ds = read_dataset(data);
    cfg.set("data.grid", grid_str(ds.dims));
    cfg.set("data.classes", std::to_string(ds.num_classes));
    const auto tc = cfg.tokenizer_config();
    const auto train_cfg = cfg.tokenizer_train_config();
    const auto dir = out_dir(cfg);
    cfg.write_snapshot(dir / "resolved_config.txt");

    const auto train = grids_of(ds.load("train"));
    const auto held = grids_of(ds.load("val"));
    if (train.empty()) throw ValidationError("dataset has no training frames");
    tok::Tokenizer model(tc, train_cfg.seed);
    std::ofstream log(dir / "metrics.log", std::ios::binary);
    const auto lines = tok::train_tokenizer(model, train, held, train_cfg, [&](const tok::TokenizerEvalLine& l) {
      std::string s = "epoch=" + std::to_string(l.epoch) + " step=" + std::to_string(l.step) + " lr=" + fmt("%.6g", l.lr) +
                      " loss=" + fmt("%.6f", l.loss.total) + " ce=" + fmt("%.6f", l.loss.cross_entropy) +
                      " lovasz=" + fmt("%.6f", l.loss.lovasz) + " codebook=" + fmt("%.6f", l.loss.codebook) +
                      " commitment=" + fmt("%.6f", l.loss.commitment) + " miou=" + fmt("%.4f", l.miou) +
                      " iou=" + fmt("%.4f", l.iou) + " codes=" + std::to_string(l.codes_used);
      log << s << "\n" << std::flush;
      std::cout << s << "\n" << std::flush;
    });
    save_tokenizer(dir, model, train_cfg.seed, train_cfg.steps);
    if (!log) throw IoError("cannot write metrics log in " + dir.string());
    return kOk;
  }
};

// ---- train-world -----------------------------------------------------------

struct TrainWorld {
  Common common;
  std::string data, tokenizer;
  std::int64_t steps = 0;
  CLI::Option* steps_opt;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("train-world", "stage 2: fit the world model on frozen scene tokens");
    common.attach(cmd, "checkpoint directory");
    cmd->add_option("--data", data, "dataset directory")->required();
    cmd->add_option("--tokenizer", tokenizer, "tokenizer checkpoint directory")->required();
    steps_opt = cmd->add_option("--steps", steps, "optimizer steps");
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    apply(cfg, steps_opt, "world.steps", steps);
    if (common.seed_opt->count()) cfg.set("world.seed", std::to_string(common.seed));
    require_dir(data, "dataset");
    require_dir(tokenizer, "tokenizer checkpoint");
    const auto ds = read_dataset(data);
    const auto tok_model = load_tokenizer(tokenizer);
    check_tokenizer_matches(*tok_model, ds);
    cfg.set("data.grid", grid_str(ds.dims));
    cfg.set("data.classes", std::to_string(ds.num_classes));
    const auto wc = cfg.world_config(tok_model->config());
    const auto train_cfg = cfg.world_train_config();
    const auto dir = out_dir(cfg);
    cfg.write_snapshot(dir / "resolved_config.txt");

    const auto train = ds.load("train");
    const auto held = ds.load("val");
    world::WorldModel model(wc, train_cfg.seed);
    std::ofstream log(dir / "metrics.log", std::ios::binary);
    world::train_world(model, *tok_model, train, held, train_cfg, [&](const world::WorldEvalLine& l) {
      std::string s = "epoch=" + std::to_string(l.epoch) + " step=" + std::to_string(l.step) + " lr=" + fmt("%.6g", l.lr) +
                      " loss=" + fmt("%.6f", l.loss.total) + " ce=" + fmt("%.6f", l.loss.cross_entropy) +
                      " ego=" + fmt("%.6f", l.loss.ego) + " token_acc=" + fmt("%.4f", l.token_accuracy) +
                      " ego_l2=" + fmt("%.4f", l.ego_l2) + " miou=" + fmt("%.4f", l.miou);
      log << s << "\n" << std::flush;
      std::cout << s << "\n" << std::flush;
    });
    save_world(dir, model, train_cfg.seed, train_cfg.steps);
    if (!log) throw IoError("cannot write metrics log in " + dir.string());
    return kOk;
  }
};

// ---- rollout ---------------------------------------------------------------

EgoPose compose(const EgoPose& base, const Vec2& p, double heading) {
  const double c = std::cos(base.yaw), s = std::sin(base.yaw);
  double yaw = base.yaw + heading;
  yaw = std::remainder(yaw, 2.0 * std::numbers::pi);
  if (yaw >= std::numbers::pi) yaw -= 2.0 * std::numbers::pi;
  return {static_cast<float>(base.x + c * p.x - s * p.y), static_cast<float>(base.y + s * p.x + c * p.y),
          static_cast<float>(yaw)};
}

std::string waypoint_table(const Trajectory& t) {
  std::string out = "# step x y heading (meters/radians, ego frame of the last observed frame)\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu %.6f %.6f %.6f\n", k + 1, t.waypoints[k].x, t.waypoints[k].y, t.headings[k]);
    out += buf;
  }
  return out;
}

struct Rollout {
  Common common;
  std::string tokenizer, world, input, decoding;
  int steps = 6;
  std::int64_t start = 0;
  CLI::Option* decoding_opt;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("rollout", "autoregressive forecast from an input window");
    common.attach(cmd, "output directory (forecast.occseq, waypoints.txt)");
    cmd->add_option("--tokenizer", tokenizer, "tokenizer checkpoint directory")->required();
    cmd->add_option("--world", world, "world model checkpoint directory")->required();
    cmd->add_option("--input", input, "input .occseq")->required();
    cmd->add_option("--start", start, "first history frame in the input (default 0)");
    cmd->add_option("--steps", steps, "frames to forecast");
    decoding_opt = cmd->add_option("--decoding", decoding, "argmax | sample:<temperature>");
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    apply(cfg, decoding_opt, "world.decoding", decoding);
    require_dir(tokenizer, "tokenizer checkpoint");
    require_dir(world, "world checkpoint");
    require_file(input, "input sequence");
    if (steps < 1) throw ConfigError("--steps must be >= 1");
    const auto tok_model = load_tokenizer(tokenizer);
    const auto world_model = load_world(world);
    check_world_matches(*world_model, *tok_model);
    const auto seq = load_sequence(fs::path(input));
    const auto& g = seq.frames.front().grid;
    if (!(g.dims() == tok_model->config().dims) || g.num_classes() != tok_model->config().num_classes) {
      throw ValidationError("input grids " + grid_str(g.dims()) + " do not match the tokenizer's " +
                            grid_str(tok_model->config().dims));
    }
    const auto history = world_model->config().history_frames;
    if (start < 0 || start + history > static_cast<std::int64_t>(seq.frames.size())) {
      throw LengthError("input window has " + std::to_string(static_cast<std::int64_t>(seq.frames.size()) - start) +
                        " frames from --start " + std::to_string(start) + ", the model needs " + std::to_string(history));
    }
    const auto dir = out_dir(cfg);
    cfg.write_snapshot(dir / "resolved_config.txt");

    const std::span<const OccFrame> window(seq.frames.data() + start, static_cast<std::size_t>(history));
    const auto res = world::rollout(*world_model, *tok_model, window, steps, cfg.decoding());
    OccSequence out;
    out.frame_dt_ms = seq.frame_dt_ms;
    for (std::size_t k = 0; k < res.grids.size(); ++k) {
      out.frames.push_back({res.grids[k], compose(window.back().pose, res.trajectory.waypoints[k], res.trajectory.headings[k])});
    }
    save_sequence(out, dir / "forecast.occseq");
    write_text(dir / "waypoints.txt", waypoint_table(res.trajectory));
    std::cout << "wrote " << out.frames.size() << " forecast frames to " << (dir / "forecast.occseq").string() << "\n";
    return kOk;
  }
};

// ---- eval ------------------------------------------------------------------

struct Eval {
  Common common;
  std::string data, tokenizer, world, split = "test", l2_mode, decoding;
  bool baseline_only = false;
  CLI::Option *l2_opt, *decoding_opt;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "forecast and planning reports, with the Copy&Paste baseline row");
    common.attach(cmd, "output directory (report.txt, metrics.txt)");
    cmd->add_option("--data", data, "dataset directory")->required();
    cmd->add_option("--split", split, "train | val | test | all")->check(CLI::IsMember({"train", "val", "test", "all"}));
    cmd->add_option("--tokenizer", tokenizer, "tokenizer checkpoint directory");
    cmd->add_option("--world", world, "world model checkpoint directory");
    cmd->add_flag("--baseline-only", baseline_only, "score only the Copy&Paste baseline");
    l2_opt = cmd->add_option("--l2-mode", l2_mode, "at-horizon | averaged | both");
    decoding_opt = cmd->add_option("--decoding", decoding, "argmax | sample:<temperature>");
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    apply(cfg, l2_opt, "eval.l2_mode", l2_mode);
    apply(cfg, decoding_opt, "world.decoding", decoding);
    require_dir(data, "dataset");
    if (!baseline_only && (tokenizer.empty() || world.empty())) {
      throw ConfigError("eval needs --tokenizer and --world unless --baseline-only is given");
    }
    if (!baseline_only) {
      require_dir(tokenizer, "tokenizer checkpoint");
      require_dir(world, "world checkpoint");
    }
    const auto ds = read_dataset(data);
    std::unique_ptr<tok::Tokenizer> tok_model;
    std::unique_ptr<world::WorldModel> world_model;
    eval::EvalOptions opt;
    if (!baseline_only) {
      tok_model = load_tokenizer(tokenizer);
      world_model = load_world(world);
      check_tokenizer_matches(*tok_model, ds);
      check_world_matches(*world_model, *tok_model);
      opt.history_frames = world_model->config().history_frames;
      opt.future_frames = world_model->config().future_frames;
      if (opt.future_frames < 6) throw ValidationError("eval needs a model with at least 6 future frames (3 s)");
    } else {
      opt.history_frames = static_cast<int>(cfg.get_int("world.history_frames"));
      opt.future_frames = static_cast<int>(cfg.get_int("world.future_frames"));
    }
    const auto mode = cfg.get("eval.l2_mode");
    opt.l2_modes.clear();
    if (mode != "averaged") opt.l2_modes.push_back(eval::L2Mode::kAtHorizon);
    if (mode != "at-horizon") opt.l2_modes.push_back(eval::L2Mode::kAveragedUpToHorizon);
    opt.collision.length = cfg.get_double("eval.collision_length");
    opt.collision.width = cfg.get_double("eval.collision_width");
    opt.collision.max_height = cfg.get_double("eval.collision_height");
    opt.threads = threads_for(cfg);

    const auto seqs = ds.load(split);
    if (seqs.empty()) throw ValidationError("split '" + split + "' of " + data + " is empty");
    const auto dir = out_dir(cfg);
    cfg.write_snapshot(dir / "resolved_config.txt");

    std::vector<eval::EvalReport> reports;
    reports.push_back(eval::evaluate(seqs, eval::copy_paste_forecast, opt, "copy_paste"));
    if (!baseline_only) {
      const auto decoding_rule = cfg.decoding();
      const eval::Forecaster f = [&](std::span<const OccFrame> history, int n) {
        const auto r = world::rollout(*world_model, *tok_model, history, n, decoding_rule);
        return eval::Forecast{r.grids, r.trajectory.displacements};
      };
      reports.push_back(eval::evaluate(seqs, f, opt, "world"));
    }
    const auto tables = eval::format_tables(reports, kClassNames);
    write_text(dir / "report.txt", tables);
    write_text(dir / "metrics.txt", eval::format_keys(reports));
    std::cout << tables;
    return kOk;
  }
};

// ---- render ----------------------------------------------------------------

std::vector<Vec2> read_waypoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open waypoint table " + path);
  std::vector<Vec2> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    int step = 0;
    Vec2 p;
    if (!(is >> step >> p.x >> p.y)) throw FormatError(path + ": bad waypoint line '" + line + "'");
    out.push_back(p);
  }
  return out;
}

struct Render {
  Common common;
  std::string input, image, waypoints;
  std::int64_t frame = 0;
  bool path = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("render", "top-down PPM image of one frame");
    common.attach(cmd, "output directory");
    cmd->add_option("--input", input, "input .occseq")->required();
    cmd->add_option("--frame", frame, "frame index (default 0)");
    cmd->add_option("--image", image, "image path (default <out>/frame_<index>.ppm)");
    cmd->add_option("--waypoints", waypoints, "overlay a waypoint table written by rollout");
    cmd->add_flag("--path", path, "overlay the sequence's own future ego positions");
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    require_file(input, "input sequence");
    if (!waypoints.empty()) require_file(waypoints, "waypoint table");
    const auto seq = load_sequence(fs::path(input));
    if (frame < 0 || frame >= static_cast<std::int64_t>(seq.frames.size())) {
      throw ValidationError("frame " + std::to_string(frame) + " out of range, the sequence has " +
                            std::to_string(seq.frames.size()) + " frames");
    }
    std::vector<Vec2> marks;
    if (!waypoints.empty()) marks = read_waypoints(waypoints);
    if (path) {
      std::vector<EgoPose> poses;
      for (std::size_t k = static_cast<std::size_t>(frame); k < seq.frames.size(); ++k) poses.push_back(seq.frames[k].pose);
      const auto t = trajectory_from_poses(poses);
      marks.insert(marks.end(), t.waypoints.begin(), t.waypoints.end());
    }
    const auto dir = out_dir(cfg);
    cfg.write_snapshot(dir / "resolved_config.txt");
    const fs::path target = image.empty() ? dir / ("frame_" + std::to_string(frame) + ".ppm") : fs::path(image);
    write_text(target, encode_ppm(render_bev(seq.frames[static_cast<std::size_t>(frame)].grid, marks)));
    std::cout << "wrote " << target.string() << "\n";
    return kOk;
  }
};

// ---- gradcheck -------------------------------------------------------------

struct GradCheck {
  Common common;
  double threshold = 1e-4;
  int seeds = 3;
  std::string fault;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("gradcheck", "finite-difference checks of every primitive and the tiny world model");
    common.attach(cmd, "output directory");
    cmd->add_option("--threshold", threshold, "max relative error (default 1e-4)");
    cmd->add_option("--seeds", seeds, "random draws per case (default 3)");
    cmd->add_option("--fault", fault, "test hook: flip the sign of one op's backward");
    cmd->callback([this] { g_result = run(); });
  }

  int run() {
    auto cfg = common.resolve();
    if (seeds < 1) throw ConfigError("--seeds must be >= 1");
    const auto dir = out_dir(cfg);
    cfg.write_snapshot(dir / "resolved_config.txt");
    nn::set_fault_injection(fault);
    const auto cases = checks::run_gradcheck_suite(seeds, cfg.get_uint("run.seed"));
    nn::set_fault_injection("");
    bool ok = true;
    for (const auto& c : cases) {
      const bool pass = c.max_rel_error < threshold;
      ok = ok && pass;
      std::printf("%-4s %-20s max_rel_error=%.3e\n", pass ? "ok" : "FAIL", c.name.c_str(), c.max_rel_error);
    }
    const auto& w = cases[checks::worst_case(cases)];
    std::printf("worst: %s max_rel_error=%.3e (analytic %.9g, numeric %.9g, seed %d)\n", w.name.c_str(), w.max_rel_error,
                w.analytic, w.numeric, w.worst_seed);
    std::printf("%s: threshold %.1e\n", ok ? "PASS" : "FAIL", threshold);
    return ok ? kOk : kCheckFailed;
  }
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kIo;
  if (dynamic_cast<const NumericError*>(&e)) return kDivergence;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const LengthError*>(&e)) {
    return kMismatch;
  }
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kIo;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occworld: 3D occupancy world model toolkit"};
  app.require_subcommand(1);
  GenData gen;
  TrainTokenizer train_tok;
  TrainWorld train_world;
  Rollout rollout;
  Eval evaluate;
  Render render;
  GradCheck gradcheck;
  gen.attach(app);
  train_tok.attach(app);
  train_world.attach(app);
  rollout.attach(app);
  evaluate.attach(app);
  render.attach(app);
  gradcheck.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return g_result;
}
