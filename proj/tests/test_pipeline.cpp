#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "occreg/evalkit.hpp"
#include "occreg/pipeline.hpp"
#include "occreg/synthworld.hpp"
#include "support.hpp"

using namespace occreg;

namespace {

const LabelTaxonomy& tax() { return LabelTaxonomy::occ3d_default(); }

// 60 x 40 m window. Half-meter voxels keep 1 m steps on the voxel lattice:
// at 0.4 m a 1 m step is 2.5 voxels and noise-free samples alias by up to
// about 0.15 m per step.
VoxelGridSpec small_spec(double voxel = 0.5) {
  VoxelGridSpec spec;
  spec.voxel_size = voxel;
  spec.min_bound = {-30.0, -20.0, -1.0};
  spec.dims = {static_cast<int>(std::lround(60.0 / voxel)), static_cast<int>(std::lround(40.0 / voxel)), 16};
  return spec;
}

// Thin walls at several headings, street trees and a road. Solid boxes are
// avoided: their interiors form a lattice that pins registration in place.
const char* kStaticScene =
    "static-strip driveable_surface 10 0 0 0 80 5 0.2\n"
    "static-strip sidewalk 10 8 0 0 80 3 0.2\n"
    "static-strip sidewalk 10 -8 0 0 80 3 0.2\n"
    "static-box manmade -12 12 3 0 4 0.3 3\n"
    "static-box manmade -16 15 3 0 0.3 3 3\n"
    "static-box manmade -8 15 3 0 0.3 3 3\n"
    "static-box manmade 6 12 4 0.2 3 0.3 4\n"
    "static-box manmade 3 15 4 0 0.3 2.5 4\n"
    "static-box manmade 9 15 4 0 0.3 2.5 4\n"
    "static-box manmade 20 12.5 2.5 0 4 0.3 2.5\n"
    "static-box manmade 24 15 2.5 0 0.3 2.5 2.5\n"
    "static-box manmade 16 15 2.5 0 0.3 2.5 2.5\n"
    "static-box manmade 0 -12 3.5 0.1 4 0.3 3.5\n"
    "static-box manmade -4 -15 3.5 0 0.3 3 3.5\n"
    "static-box manmade 4 -15 3.5 0 0.3 3 3.5\n"
    "static-box manmade 16 -13 2 -0.15 3 0.3 2\n"
    "static-box manmade 19 -16 2 0 0.3 3 2\n"
    "static-box manmade -20 -14 3 0 0.3 4 3\n"
    "static-column vegetation -2 9.5 2.5 0 0.5 1 2.5\n"
    "static-column vegetation 5 -9.5 2 0 0.6 1 2\n"
    "static-column vegetation 13 9.5 2.5 0 0.5 1 2.5\n"
    "static-column vegetation 30 -9.5 3 0 0.6 1 3\n"
    "static-box barrier 12 -4 0.5 0.3 1.5 0.3 0.5\n";

GeneratedSequence straight_sequence(const std::string& scene, std::size_t frames, double step,
                                    const NoiseModel& noise = {}, const VoxelGridSpec& spec = small_spec()) {
  std::vector<Pose> path;
  for (std::size_t i = 0; i < frames; ++i) path.push_back(Pose::from_translation({step * static_cast<double>(i), 0, 0}));
  return generate_sequence(parse_scene(scene, tax()), path, spec, noise, tax());
}

bool same_maps(const GlobalMap& a, const GlobalMap& b) {
  if (a.size() != b.size() || a.t() != b.t()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.voxels()[i];
    const auto& y = b.voxels()[i];
    if (x.key != y.key || x.position != y.position || x.label != y.label || x.t0 != y.t0 || x.f != y.f ||
        x.covariance != y.covariance || x.label_counts != y.label_counts) {
      return false;
    }
  }
  return true;
}

bool same_trajectories(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].frame_index != b[i].frame_index || a[i].pose.translation != b[i].pose.translation ||
        a[i].pose.rotation.coeffs() != b[i].pose.rotation.coeffs()) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("initialize seeds the map at identity") {
  const auto seq = straight_sequence(kStaticScene, 2, 1.0);
  Odometry odo(OdometryConfig{}, tax());
  CHECK_FALSE(odo.initialized());
  const auto r = odo.initialize(seq.frames[0], small_spec());
  CHECK(odo.initialized());
  CHECK(odo.map().size() == seq.frames[0].size());
  CHECK(r.map_voxels == seq.frames[0].size());
  REQUIRE(odo.trajectory().size() == 1);
  CHECK(odo.trajectory()[0].pose.translation == Eigen::Vector3d::Zero());
  CHECK(odo.trajectory()[0].pose.rotation.coeffs() == Pose::identity().rotation.coeffs());

  Odometry empty(OdometryConfig{}, tax());
  CHECK_THROWS_AS(empty.initialize(SemanticPointCloud{}, small_spec()), Error);
  CHECK_THROWS_AS(empty.process_frame(seq.frames[1]), Error);
}

TEST_CASE("identical second frame gives the identity pose") {
  const auto seq = straight_sequence(kStaticScene, 1 + 1, 0.0);
  Odometry odo(OdometryConfig{}, tax());
  odo.initialize(seq.frames[0], small_spec());
  auto again = seq.frames[0];
  again.frame_index = 1;
  const auto r = odo.process_frame(again);
  CHECK_FALSE(r.failed);
  CHECK(r.pose.translation.norm() < 1e-4);
  CHECK(Eigen::AngleAxisd(r.pose.rotation).angle() < 1e-4);

  const auto run = run_sequence(seq.frames, small_spec(), OdometryConfig{}, tax());
  REQUIRE(run.trajectory.size() == 2);
  CHECK(run.trajectory[1].pose.translation.norm() < 1e-4);
}

TEST_CASE("straight 1 m per frame sequence") {
  const auto seq = straight_sequence(kStaticScene, 12, 1.0);
  const auto run = run_sequence(seq.frames, small_spec(), OdometryConfig{}, tax());
  REQUIRE(run.trajectory.size() == seq.frames.size());
  CHECK(run.failed_frames == 0);
  for (std::size_t i = 1; i < run.trajectory.size(); ++i) {
    const Pose rel = pose_compose(pose_inverse(run.trajectory[i - 1].pose), run.trajectory[i].pose);
    CHECK(std::abs(rel.translation.norm() - 1.0) < 0.1);
    CHECK(run.trajectory[i].frame_index == i);
  }
  CHECK(ape(run.trajectory, seq.ground_truth, Alignment::none).rmse < 0.2);
}

TEST_CASE("whole-voxel steps on the default voxel size") {
  const auto spec = small_spec(0.4);
  const auto seq = straight_sequence(kStaticScene, 8, 0.8, {}, spec);
  const auto run = run_sequence(seq.frames, spec, OdometryConfig{}, tax());
  for (std::size_t i = 1; i < run.trajectory.size(); ++i) {
    const Pose rel = pose_compose(pose_inverse(run.trajectory[i - 1].pose), run.trajectory[i].pose);
    CHECK(std::abs(rel.translation.norm() - 0.8) < 0.1);
  }
}

TEST_CASE("runs are bitwise deterministic") {
  NoiseModel noise;
  noise.label_flip_rate = 0.02;
  noise.dropout_rate = 0.05;
  noise.spurious_rate = 30;
  noise.seed = 5;
  const auto seq = straight_sequence(kStaticScene, 8, 1.5, noise);
  const auto a = run_sequence(seq.frames, small_spec(), OdometryConfig{}, tax());
  const auto b = run_sequence(seq.frames, small_spec(), OdometryConfig{}, tax());
  CHECK(same_trajectories(a.trajectory, b.trajectory));
  CHECK(same_maps(a.map, b.map));
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].refined_correspondences == b.frames[i].refined_correspondences);
    CHECK(a.frames[i].refined_iterations == b.frames[i].refined_iterations);
  }
}

TEST_CASE("saved state replays identically") {
  const auto seq = straight_sequence(kStaticScene, 7, 1.0);
  Odometry live(OdometryConfig{}, tax());
  live.initialize(seq.frames[0], small_spec());
  for (std::size_t i = 1; i < 3; ++i) live.process_frame(seq.frames[i]);
  const auto bytes = live.save_state();

  Odometry resumed(OdometryConfig{}, tax());
  resumed.load_state(bytes);
  CHECK(resumed.initialized());
  CHECK(resumed.save_state() == bytes);
  for (std::size_t i = 3; i < seq.frames.size(); ++i) {
    const auto x = live.process_frame(seq.frames[i]);
    const auto y = resumed.process_frame(seq.frames[i]);
    CHECK(x.pose.translation == y.pose.translation);
    CHECK(x.pose.rotation.coeffs() == y.pose.rotation.coeffs());
  }
  CHECK(same_maps(live.map(), resumed.map()));
  CHECK(same_trajectories(live.trajectory(), resumed.trajectory()));

  auto broken = bytes;
  broken.resize(broken.size() / 2);
  Odometry bad(OdometryConfig{}, tax());
  CHECK_THROWS_AS(bad.load_state(broken), Error);
}

TEST_CASE("infinite displacement threshold and zero p-index threshold reduce to semantic gicp") {
  NoiseModel noise;
  noise.label_flip_rate = 0.02;
  noise.seed = 9;
  const auto seq = straight_sequence(std::string(kStaticScene) + "actor car -8 4 0.8 0 2.2 0.9 0.8 1.5 0 0\n", 8, 1.0, noise);
  // Downsampling coarsens even at threshold 0, so it is off in both runs.
  OdometryConfig degenerate;
  degenerate.downsample_period = 0;
  degenerate.dynamic.displacement_threshold = std::numeric_limits<double>::infinity();
  degenerate.pindex_threshold = 0.0;
  OdometryConfig reference;
  reference.downsample_period = 0;
  reference.dynamic_filter = false;
  reference.pfilter = false;
  const auto a = run_sequence(seq.frames, small_spec(), degenerate, tax());
  const auto b = run_sequence(seq.frames, small_spec(), reference, tax());
  CHECK(same_trajectories(a.trajectory, b.trajectory));
  CHECK(same_maps(a.map, b.map));
}

TEST_CASE("failed registration keeps the prediction and leaves the map alone") {
  const auto seq = straight_sequence(kStaticScene, 3, 1.0);
  Odometry odo(OdometryConfig{}, tax());
  odo.initialize(seq.frames[0], small_spec());
  odo.process_frame(seq.frames[1]);
  const GlobalMap before = odo.map();
  const Pose predicted = odo.predict();

  // A lone far-away voxel cannot reach the 10-correspondence floor.
  SemanticPointCloud lonely;
  lonely.frame_index = 2;
  lonely.taxonomy_id = seq.frames[0].taxonomy_id;
  lonely.points.push_back({Eigen::Vector3d(29.75, 19.75, 5.25), tax().require("manmade")});
  const auto r = odo.process_frame(lonely);
  CHECK(r.failed);
  CHECK_FALSE(r.failure.empty());
  CHECK(r.pose.translation == predicted.translation);
  CHECK(same_maps(odo.map(), before));
  REQUIRE(odo.trajectory().size() == 3);
  CHECK(odo.trajectory().back().frame_index == 2);

  // The next real frame still registers.
  auto next = straight_sequence(kStaticScene, 4, 1.0).frames[3];
  const auto ok = odo.process_frame(next);
  CHECK_FALSE(ok.failed);
  CHECK(std::abs(ok.pose.translation.x() - 3.0) < 0.1);
}

TEST_CASE("motion model prediction") {
  const auto seq = straight_sequence(kStaticScene, 3, 1.0);
  OdometryConfig cv;
  Odometry a(cv, tax());
  a.initialize(seq.frames[0], small_spec());
  CHECK(a.predict().translation == Eigen::Vector3d::Zero());
  a.process_frame(seq.frames[1]);
  const Pose p1 = a.trajectory().back().pose;
  const Pose expect = pose_compose(p1, p1);
  CHECK(testing::max_pose_diff(a.predict(), expect) < 1e-12);

  OdometryConfig still = cv;
  still.motion_model = MotionModel::identity;
  Odometry b(still, tax());
  b.initialize(seq.frames[0], small_spec());
  b.process_frame(seq.frames[1]);
  CHECK(testing::max_pose_diff(b.predict(), b.trajectory().back().pose) < 1e-15);
}

TEST_CASE("run_sequence preconditions") {
  const auto seq = straight_sequence(kStaticScene, 2, 1.0);
  CHECK_THROWS_AS(run_sequence({seq.frames[0]}, small_spec(), OdometryConfig{}, tax()), Error);
  std::vector<SemanticPointCloud> empty_first{SemanticPointCloud{}, seq.frames[1]};
  CHECK_THROWS_AS(run_sequence(empty_first, small_spec(), OdometryConfig{}, tax()), Error);
  OdometryConfig bad;
  bad.crop_radius = -1.0;
  CHECK_THROWS_AS(run_sequence(seq.frames, small_spec(), bad, tax()), Error);
}

TEST_CASE("config text round trip") {
  OdometryConfig c;
  c.coarse.max_iterations = 17;
  c.refined.max_corr_dist = 0.75;
  c.dynamic.displacement_threshold = std::numeric_limits<double>::infinity();
  c.pindex_threshold = 0.1 + 0.2;  // not exactly 0.3
  c.motion_model = MotionModel::identity;
  c.refined.search = CorrespondenceSearch::nearest_then_filter;
  c.label_based_filter = true;
  const std::string text = format_config(c);
  const OdometryConfig back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.pindex_threshold == c.pindex_threshold);
  CHECK(std::isinf(back.dynamic.displacement_threshold));
  CHECK(back.motion_model == MotionModel::identity);

  CHECK(parse_config("# comment\n\n  downsample_period = 3  \n").downsample_period == 3);
  CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("pindex_threshold = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("pindex_threshold\n"), ConfigError);
  OdometryConfig overridden;
  apply_setting(overridden, "dynamic_filter", "false");
  CHECK_FALSE(overridden.dynamic_filter);
}

TEST_CASE("dynamic object filter helps against a large mover") {
  // A bus-sized box overtaking at 3 m per frame.
  const std::string scene = std::string(kStaticScene) + "actor bus -20 4 1.6 0 6 1.25 1.6 3 0 0\n";
  const auto seq = straight_sequence(scene, 12, 1.0);
  OdometryConfig full;
  OdometryConfig without = full;
  without.dynamic_filter = false;
  const double with_dof = ape(run_sequence(seq.frames, small_spec(), full, tax()).trajectory, seq.ground_truth).rmse;
  const double no_dof = ape(run_sequence(seq.frames, small_spec(), without, tax()).trajectory, seq.ground_truth).rmse;
  MESSAGE("APE with DOF " << with_dof << ", without " << no_dof);
  CHECK(with_dof < no_dof);
}
