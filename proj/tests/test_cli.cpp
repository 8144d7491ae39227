#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "occreg/cli.hpp"
#include "occreg/occ_io.hpp"
#include "occreg/synthworld.hpp"
#include "support.hpp"

using namespace occreg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "occreg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void put_frame(const fs::path& path, const SemanticPointCloud& cloud) {
  fs::create_directories(path.parent_path());
  write_frame(path, cloud, VoxelGridSpec{});
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const LabelTaxonomy& tax() { return LabelTaxonomy::occ3d_default(); }

SemanticPointCloud scene_frame(std::uint32_t index) {
  const auto world = parse_scene(
      "static-strip sidewalk 0 0 0 0 30 30 0.2\n"
      "static-box manmade 6 5 2 0.3 3 0.3 2\n"
      "static-box manmade -5 -6 2 -0.5 0.3 3 2\n"
      "static-column vegetation -4 6 2 0 0.8 1 2\n",
      tax());
  auto cloud = render_frame(world, Pose::identity(), VoxelGridSpec{}, 0);
  cloud.frame_index = index;
  return cloud;
}

}  // namespace

TEST_CASE("two identical frames run cleanly") {
  const auto dir = testing::temp_dir("cli_identity");
  for (std::uint32_t i = 0; i < 2; ++i) put_frame(dir / "in" / frame_filename(i), scene_frame(i));
  const auto r = cli({"run", "--in", (dir / "in").string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitOk);
  const auto traj = slurp(dir / "out" / "trajectory.traj");
  CHECK(count_lines(traj) == 2);
  for (const char* name : {"map.socc", "metrics.csv", "timings.csv", "manifest.txt"}) {
    CHECK(fs::exists(dir / "out" / name));
  }
  const auto t = read_trajectory(dir / "out" / "trajectory.traj");
  CHECK(t[1].pose.translation.norm() < 1e-4);
  CHECK(slurp(dir / "out" / "manifest.txt").find("tool_version: 0.1.0") != std::string::npos);
}

TEST_CASE("run exit codes") {
  const auto dir = testing::temp_dir("cli_codes");
  // Empty frame 0 is fatal.
  put_frame(dir / "empty" / frame_filename(0), SemanticPointCloud{});
  put_frame(dir / "empty" / frame_filename(1), scene_frame(1));
  CHECK(cli({"run", "--in", (dir / "empty").string(), "--out", (dir / "o1").string()}).code == kExitFatal);

  // A frame that cannot register gives exit 2, but outputs are written.
  put_frame(dir / "fail" / frame_filename(0), scene_frame(0));
  SemanticPointCloud lonely;
  lonely.frame_index = 1;
  lonely.points.push_back({Eigen::Vector3d(39.8, 39.8, 5.0), tax().require("manmade")});
  put_frame(dir / "fail" / frame_filename(1), lonely);
  const auto failed = cli({"run", "--in", (dir / "fail").string(), "--out", (dir / "o2").string()});
  CHECK(failed.code == kExitFrameFailures);
  CHECK(failed.out.find("failed_frames: 1") != std::string::npos);
  CHECK(fs::exists(dir / "o2" / "trajectory.traj"));

  CHECK(cli({"run", "--in", (dir / "missing").string(), "--out", (dir / "o3").string()}).code == kExitFatal);
  CHECK(cli({"run", "--in", (dir / "fail").string()}).code == kExitFatal);

  std::ofstream(dir / "bad.cfg") << "no_such_key = 3\n";
  CHECK(cli({"run", "--in", (dir / "fail").string(), "--out", (dir / "o4").string(), "--config",
             (dir / "bad.cfg").string()})
            .code == kExitFatal);
  CHECK(cli({"run", "--in", (dir / "fail").string(), "--out", (dir / "o5").string(), "--set", "pindex_threshold"})
            .code == kExitFatal);
}

TEST_CASE("ablation flags land in the manifest") {
  const auto dir = testing::temp_dir("cli_flags");
  for (std::uint32_t i = 0; i < 2; ++i) put_frame(dir / "in" / frame_filename(i), scene_frame(i));
  std::ofstream(dir / "c.cfg") << "downsample_period = 7\ncrop_radius = 30\n";
  const auto r = cli({"run", "--in", (dir / "in").string(), "--out", (dir / "out").string(), "--config",
                      (dir / "c.cfg").string(), "--no-dynamic-filter", "--no-semantic-filter", "--no-pfilter", "--set",
                      "crop_radius=45"});
  REQUIRE(r.code == kExitOk);
  const auto manifest = slurp(dir / "out" / "manifest.txt");
  CHECK(manifest.find("dynamic_filter = false") != std::string::npos);
  CHECK(manifest.find("semantic_filter = false") != std::string::npos);
  CHECK(manifest.find("pfilter = false") != std::string::npos);
  CHECK(manifest.find("downsample_period = 7") != std::string::npos);
  // Flags override the file.
  CHECK(manifest.find("crop_radius = 45") != std::string::npos);
}

TEST_CASE("synth writes a sequence and is deterministic") {
  const auto dir = testing::temp_dir("cli_synth");
  const auto a = cli({"synth", "--preset", "urban-block", "--frames", "3", "--seed", "7", "--out", (dir / "a").string()});
  const auto b = cli({"synth", "--preset", "urban-block", "--frames", "3", "--seed", "7", "--out", (dir / "b").string()});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  for (std::uint32_t i = 0; i < 3; ++i) {
    CHECK(fs::exists(dir / "a" / frame_filename(i)));
    CHECK(slurp(dir / "a" / frame_filename(i)) == slurp(dir / "b" / frame_filename(i)));
  }
  CHECK(!fs::exists(dir / "a" / frame_filename(3)));
  CHECK(count_lines(slurp(dir / "a" / "gt.traj")) == 3);
  CHECK(slurp(dir / "a" / "gt.traj") == slurp(dir / "b" / "gt.traj"));
  CHECK(slurp(dir / "a" / "gt_map.socc") == slurp(dir / "b" / "gt_map.socc"));

  CHECK(cli({"synth", "--frames", "0", "--out", (dir / "c").string()}).code == kExitFatal);
  CHECK(cli({"synth", "--preset", "nowhere", "--out", (dir / "d").string()}).code == kExitFatal);
  CHECK(cli({"synth", "--flip", "1.5", "--frames", "2", "--out", (dir / "e").string()}).code == kExitFatal);
}

TEST_CASE("eval-traj and eval-map") {
  const auto dir = testing::temp_dir("cli_eval");
  Trajectory t;
  for (std::uint32_t i = 0; i < 5; ++i) t.push_back({i, Pose::from_yaw(0.1 * i, {1.0 * i, 0.2 * i, 0.0})});
  write_trajectory(dir / "a.traj", t);
  const auto same = cli({"eval-traj", "--est", (dir / "a.traj").string(), "--gt", (dir / "a.traj").string(), "--align",
                         "none", "--csv", (dir / "ape.csv").string()});
  CHECK(same.code == kExitOk);
  CHECK(same.out.find("rmse_m: 0\n") != std::string::npos);
  CHECK(count_lines(slurp(dir / "ape.csv")) == 6);
  for (const char* mode : {"none", "first", "umeyama"}) {
    CHECK(cli({"eval-traj", "--est", (dir / "a.traj").string(), "--gt", (dir / "a.traj").string(), "--align", mode})
              .code == kExitOk);
  }
  CHECK(cli({"eval-traj", "--est", (dir / "a.traj").string(), "--gt", (dir / "a.traj").string(), "--align", "sim3"})
            .code == kExitFatal);
  CHECK(cli({"eval-traj", "--est", (dir / "nope.traj").string(), "--gt", (dir / "a.traj").string()}).code == kExitFatal);
  write_trajectory(dir / "b.traj", Trajectory{{99, Pose::identity()}});
  CHECK(cli({"eval-traj", "--est", (dir / "b.traj").string(), "--gt", (dir / "a.traj").string()}).code == kExitFatal);

  write_frame(dir / "m.socc", scene_frame(0), VoxelGridSpec{});
  const auto m = cli({"eval-map", "--map", (dir / "m.socc").string(), "--gt-map", (dir / "m.socc").string()});
  CHECK(m.code == kExitOk);
  CHECK(m.out.find("threshold_m: 0.4") != std::string::npos);
  CHECK(m.out.find("precision: 1") != std::string::npos);
  CHECK(m.out.find("completion_ratio: 1") != std::string::npos);
}

TEST_CASE("info and usage errors") {
  const auto info = cli({"info"});
  CHECK(info.code == kExitOk);
  CHECK(info.out.find("tool_version: 0.1.0") != std::string::npos);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"frobnicate"}).code == kExitFatal);
  CHECK(cli({}).code == kExitFatal);
}
