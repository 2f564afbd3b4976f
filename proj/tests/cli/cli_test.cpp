#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "occworld/dataset.hpp"
#include "occworld/occgrid.hpp"
#include "occworld/render.hpp"
#include "occworld/synthetic.hpp"

namespace occworld {
namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int code = -1;
  std::string output;
};

class Cli : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "occworld_cli_test"; }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    std::ofstream(root() / "tiny.cfg") << "# small models so the suite stays fast\n"
                                          "tokenizer.C=8\ntokenizer.N=16\ntokenizer.width=4\n"
                                          "tokenizer.steps=12\ntokenizer.eval_every=6\n"
                                          "world.width=8\nworld.heads=2\nworld.layers_per_scale=1\n"
                                          "world.ego_spatial_layers=1\nworld.ego_temporal_layers=1\n"
                                          "world.steps=6\nworld.eval_every=3\n";
  }

  static CmdResult run(const std::string& args) {
    const auto log = root() / "last_output.txt";
    const std::string cmd = "cd '" + root().string() + "' && '" OCCWORLD_CLI "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = slurp(log);
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  static std::map<std::string, double> keys(const std::string& text, const std::string& method) {
    std::map<std::string, double> out;
    std::istringstream is(text);
    std::string line, section;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line[0] == '[') {
        section = line.substr(1, line.size() - 2);
      } else if (section == method) {
        const auto eq = line.find('=');
        out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
      }
    }
    return out;
  }

  // Small moving dataset shared by several tests.
  static void ensure_data() {
    if (fs::exists(root() / "d" / kManifestName)) return;
    ASSERT_EQ(run("gen-data --out d --scenes 10 --frames 12 --seed 7 --grid 32x32x4").code, 0);
  }
  static void ensure_models() {
    ensure_data();
    if (fs::exists(root() / "wm" / "manifest.txt")) return;
    ASSERT_EQ(run("train-tokenizer --config tiny.cfg --data d --out tok --seed 1").code, 0);
    ASSERT_EQ(run("train-world --config tiny.cfg --data d --tokenizer tok --out wm --seed 1").code, 0);
  }
};

TEST_F(Cli, GenDataIsDeterministic) {
  ensure_data();
  ASSERT_EQ(run("gen-data --out d_again --scenes 10 --frames 12 --seed 7 --grid 32x32x4").code, 0);
  const auto ds = read_dataset(root() / "d");
  ASSERT_EQ(ds.entries.size(), 10u);
  for (const auto& e : ds.entries) EXPECT_EQ(slurp(root() / "d" / e.file), slurp(root() / "d_again" / e.file));
  EXPECT_EQ(slurp(root() / "d" / kManifestName), slurp(root() / "d_again" / kManifestName));
  EXPECT_EQ(load_sequence(root() / "d" / ds.entries[0].file).frames.size(), 12u);
}

TEST_F(Cli, GenDataEmptyAndFlagGrammar) {
  EXPECT_EQ(run("gen-data --out empty --scenes 0").code, 0);
  EXPECT_TRUE(read_dataset(root() / "empty").entries.empty());
  EXPECT_NE(slurp(root() / "empty" / "resolved_config.txt").find("data.grid=64x64x8"), std::string::npos);

  const auto bad = run("gen-data --out g --grid 64x64");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("HxWxD"), std::string::npos);
  EXPECT_EQ(run("gen-data --out g --scenes many").code, 2);
  EXPECT_EQ(run("gen-data --scenes 1").code, 2);
  EXPECT_EQ(run("gen-data --out g --set no.such.key=1").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  std::ofstream(root() / "gen.cfg") << "data.scenes=3 # from the file\ndata.frames=4\ndata.grid=16x16x2\n";
  ASSERT_EQ(run("gen-data --config gen.cfg --out from_file").code, 0);
  EXPECT_EQ(read_dataset(root() / "from_file").entries.size(), 3u);
  ASSERT_EQ(run("gen-data --config gen.cfg --out from_flag --scenes 2").code, 0);
  EXPECT_EQ(read_dataset(root() / "from_flag").entries.size(), 2u);
  const auto snap = slurp(root() / "from_flag" / "resolved_config.txt");
  EXPECT_NE(snap.find("data.scenes=2\n"), std::string::npos);
  EXPECT_NE(snap.find("data.frames=4\n"), std::string::npos);

  std::ofstream(root() / "bad.cfg") << "data.scenes=3\ndata.scene=4\n";
  EXPECT_EQ(run("gen-data --config bad.cfg --out nope").code, 2);
}

TEST_F(Cli, TrainingWritesLogsAndIsReproducible) {
  ensure_models();
  EXPECT_EQ(run("train-world --data d --out w2").code, 2);  // --tokenizer is required

  for (const char* dir : {"tok", "wm"}) {
    const auto log = slurp(root() / dir / "metrics.log");
    std::istringstream is(log);
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) {
      ++lines;
      for (const char* k : {"epoch=", "loss=", "miou="}) EXPECT_NE(line.find(k), std::string::npos) << dir << ": " << line;
    }
    EXPECT_EQ(lines, 2) << dir;
    EXPECT_TRUE(fs::exists(root() / dir / "resolved_config.txt"));
  }

  ASSERT_EQ(run("train-tokenizer --config tiny.cfg --data d --out tok_b --seed 1 --deterministic").code, 0);
  ASSERT_EQ(run("train-world --config tiny.cfg --data d --tokenizer tok_b --out wm_b --seed 1 --deterministic").code, 0);
  for (const auto& [a, b] : std::map<std::string, std::string>{{"tok", "tok_b"}, {"wm", "wm_b"}}) {
    for (const auto& entry : fs::directory_iterator(root() / a)) {
      const auto name = entry.path().filename().string();
      if (name == "resolved_config.txt") continue;
      EXPECT_EQ(slurp(entry.path()), slurp(root() / b / name)) << a << "/" << name;
    }
  }
}

TEST_F(Cli, TrainingErrorsMapToExitCodes) {
  ensure_models();
  EXPECT_EQ(run("train-tokenizer --config tiny.cfg --data missing_dir --out t").code, 3);
  EXPECT_EQ(run("train-tokenizer --config tiny.cfg --data d --out t --set tokenizer.lr=1e30").code, 4);
  ASSERT_EQ(run("gen-data --out d16 --scenes 2 --frames 8 --grid 16x16x2").code, 0);
  EXPECT_EQ(run("train-world --config tiny.cfg --data d16 --tokenizer tok --out w").code, 5);
}

TEST_F(Cli, RolloutWritesSequenceAndWaypoints) {
  ensure_models();
  const auto ds = read_dataset(root() / "d");
  const std::string input = "d/" + ds.entries[1].file;
  const auto r = run("rollout --tokenizer tok --world wm --input " + input + " --steps 6 --out ro");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto seq = load_sequence(root() / "ro" / "forecast.occseq");
  EXPECT_EQ(seq.frames.size(), 6u);
  EXPECT_EQ(seq.frames[0].grid.dims(), (GridDims{32, 32, 4}));
  std::ostringstream bytes;
  save_sequence(seq, bytes);
  EXPECT_EQ(bytes.str(), slurp(root() / "ro" / "forecast.occseq"));
  const auto table = slurp(root() / "ro" / "waypoints.txt");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);

  ASSERT_EQ(run("rollout --tokenizer tok --world wm --input " + input + " --steps 6 --out ro_b --deterministic").code, 0);
  EXPECT_EQ(slurp(root() / "ro" / "forecast.occseq"), slurp(root() / "ro_b" / "forecast.occseq"));
  EXPECT_EQ(table, slurp(root() / "ro_b" / "waypoints.txt"));

  ASSERT_EQ(run("gen-data --out short --scenes 1 --frames 3 --grid 32x32x4").code, 0);
  EXPECT_EQ(run("rollout --tokenizer tok --world wm --input short/" + read_dataset(root() / "short").entries[0].file +
                " --out ro_c").code,
            5);
  EXPECT_EQ(run("rollout --tokenizer tok --world wm --input " + input + " --start 9 --out ro_c").code, 5);
  EXPECT_EQ(run("rollout --tokenizer wm --world wm --input " + input + " --out ro_c").code, 3);
  EXPECT_EQ(run("rollout --tokenizer tok --world wm --input nothing.occseq --out ro_c").code, 3);
}

TEST_F(Cli, EvalReportsBaselineAndModel) {
  ensure_models();
  auto r = run("eval --data d --split all --tokenizer tok --world wm --out ev --l2-mode both");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto text = slurp(root() / "ev" / "metrics.txt");
  for (const char* method : {"copy_paste", "world"}) {
    const auto k = keys(text, method);
    EXPECT_EQ(k.at("samples"), 10.0);
    for (const char* m : {"miou", "iou", "l2", "l2_avg", "collision"}) {
      const std::string p(m);
      EXPECT_NEAR(k.at(p + ".avg"), (k.at(p + ".1s") + k.at(p + ".2s") + k.at(p + ".3s")) / 3.0, 1e-5) << method << m;
    }
  }
  const auto report = slurp(root() / "ev" / "report.txt");
  for (const char* s : {"mIoU 1s", "mIoU 2s", "mIoU 3s", "mIoU Avg", "at-horizon", "averaged-up-to-horizon"}) {
    EXPECT_NE(report.find(s), std::string::npos) << s;
  }
  ASSERT_EQ(run("eval --data d --split all --tokenizer tok --world wm --out ev_b --l2-mode both").code, 0);
  EXPECT_EQ(text, slurp(root() / "ev_b" / "metrics.txt"));
  EXPECT_EQ(report, slurp(root() / "ev_b" / "report.txt"));

  ASSERT_EQ(run("eval --data d --split all --baseline-only --out ev_c").code, 0);
  EXPECT_EQ(keys(slurp(root() / "ev_c" / "metrics.txt"), "world").size(), 0u);
  EXPECT_EQ(keys(slurp(root() / "ev_c" / "metrics.txt"), "copy_paste").count("l2_avg.1s"), 0u);

  EXPECT_EQ(run("eval --data d --split all --out ev_d").code, 2);
  ASSERT_EQ(run("gen-data --out d16b --scenes 3 --frames 12 --grid 16x16x2").code, 0);
  EXPECT_EQ(run("eval --data d16b --split all --tokenizer tok --world wm --out ev_e").code, 5);
  ASSERT_EQ(run("gen-data --out d_short --scenes 2 --frames 8 --grid 32x32x4").code, 0);
  EXPECT_EQ(run("eval --data d_short --split all --baseline-only --out ev_f").code, 5);
}

TEST_F(Cli, BaselineIsPerfectOnStaticScenes) {
  ASSERT_EQ(run("gen-data --out still --scenes 4 --frames 11 --grid 32x32x4 --set data.ego_speeds=0 "
                "--set data.max_vehicles=0 --set data.max_pedestrians=0")
                .code,
            0);
  ASSERT_EQ(run("eval --data still --split all --baseline-only --out ev_still").code, 0);
  const auto k = keys(slurp(root() / "ev_still" / "metrics.txt"), "copy_paste");
  for (const char* h : {"1s", "2s", "3s", "avg"}) EXPECT_DOUBLE_EQ(k.at(std::string("miou.") + h), 100.0);
}

TEST_F(Cli, RenderProducesPpm) {
  OccSequence seq;
  OccGrid empty({6, 8, 2}, 6);
  OccGrid car = empty;
  for (std::int64_t h = 1; h < 3; ++h)
    for (std::int64_t w = 2; w < 5; ++w) car.set(h, w, 0, kVehicle);
  seq.frames = {{empty, {}}, {car, {}}};
  save_sequence(seq, root() / "hand.occseq");

  ASSERT_EQ(run("render --input hand.occseq --frame 0 --out rend").code, 0);
  const auto free_img = slurp(root() / "rend" / "frame_0.ppm");
  const std::string header = "P6\n8 6\n255\n";
  ASSERT_EQ(free_img.substr(0, header.size()), header);
  ASSERT_EQ(free_img.size(), header.size() + 8 * 6 * 3);
  const auto bg = class_color(kFree);
  for (std::size_t i = header.size(); i < free_img.size(); i += 3) {
    EXPECT_EQ(static_cast<std::uint8_t>(free_img[i]), bg[0]);
  }

  ASSERT_EQ(run("render --input hand.occseq --frame 1 --out rend --image car.ppm").code, 0);
  const auto img = slurp(root() / "car.ppm");
  const auto vc = class_color(kVehicle);
  for (std::int64_t row = 0; row < 6; ++row) {
    for (std::int64_t col = 0; col < 8; ++col) {
      const bool inside = row >= 3 && row <= 4 && col >= 3 && col <= 5;  // rows 6-1-h, cols 8-1-w
      const auto i = header.size() + static_cast<std::size_t>((row * 8 + col) * 3);
      EXPECT_EQ(static_cast<std::uint8_t>(img[i]), inside ? vc[0] : bg[0]) << row << "," << col;
    }
  }
  ASSERT_EQ(run("render --input hand.occseq --frame 1 --out rend --image car_b.ppm --deterministic").code, 0);
  EXPECT_EQ(img, slurp(root() / "car_b.ppm"));
  EXPECT_EQ(run("render --input hand.occseq --frame 2 --out rend").code, 5);
  EXPECT_EQ(run("render --input missing.occseq --out rend").code, 3);
}

TEST_F(Cli, GradCheckContract) {
  auto r = run("gradcheck --seeds 1 --out gc");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("worst:"), std::string::npos);
  r = run("gradcheck --seeds 1 --out gc --fault layer_norm");
  EXPECT_EQ(r.code, 6);
  EXPECT_NE(r.output.find("FAIL layer_norm"), std::string::npos) << r.output;
  r = run("gradcheck --seeds 1 --out gc --threshold 1e-12");
  EXPECT_EQ(r.code, 6);
  EXPECT_TRUE(fs::exists(root() / "gc" / "resolved_config.txt"));
}

TEST_F(Cli, CommandsLeaveTheirInputsUntouched) {
  ensure_models();
  auto snapshot = [](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
  };
  const auto data = snapshot(root() / "d"), tok = snapshot(root() / "tok"), wm = snapshot(root() / "wm");
  const std::string input = "d/" + read_dataset(root() / "d").entries[0].file;
  ASSERT_EQ(run("train-tokenizer --config tiny.cfg --data d --out tok_c --steps 2").code, 0);
  ASSERT_EQ(run("train-world --config tiny.cfg --data d --tokenizer tok --out wm_c --steps 2").code, 0);
  ASSERT_EQ(run("rollout --tokenizer tok --world wm --input " + input + " --out ro_d").code, 0);
  ASSERT_EQ(run("eval --data d --split all --tokenizer tok --world wm --out ev_g").code, 0);
  ASSERT_EQ(run("render --input " + input + " --out rend_b").code, 0);
  EXPECT_EQ(snapshot(root() / "d"), data);
  EXPECT_EQ(snapshot(root() / "tok"), tok);
  EXPECT_EQ(snapshot(root() / "wm"), wm);
}

TEST_F(Cli, ThreadCapDoesNotChangeResults) {
  ensure_models();
  const std::string input = "d/" + read_dataset(root() / "d").entries[2].file;
  ASSERT_EQ(run("rollout --tokenizer tok --world wm --input " + input + " --out ro_t1").code, 0);
  ASSERT_EQ(run("rollout --tokenizer tok --world wm --input " + input + " --out ro_t1 --deterministic").code, 0);
  const auto one = slurp(root() / "ro_t1" / "forecast.occseq");
  const auto r = run("rollout --tokenizer tok --world wm --input " + input + " --out ro_t4 --set run.threads=4");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(one, slurp(root() / "ro_t4" / "forecast.occseq"));
  ASSERT_EQ(std::system(("cd '" + root().string() + "' && OCCWORLD_THREADS=2 '" OCCWORLD_CLI "' rollout --tokenizer tok --world wm --input " +
                         input + " --out ro_env > /dev/null 2>&1")
                            .c_str()),
            0);
  EXPECT_EQ(one, slurp(root() / "ro_env" / "forecast.occseq"));
}

}  // namespace
}  // namespace occworld
