#include "occreg/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "occreg/evalkit.hpp"
#include "occreg/parallel.hpp"
#include "occreg/pipeline.hpp"
#include "occreg/synthworld.hpp"

namespace occreg {

namespace {

namespace fs = std::filesystem;

std::string fmt_ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(IoErrorKind::open_failed, "cannot write " + path.string());
  f << text;
  if (!f) throw IoError(IoErrorKind::open_failed, "write failed for " + path.string());
}

struct RunArgs {
  std::string in_dir;
  std::string out_dir;
  std::string config_path;
  bool no_semantic = false;
  bool no_dynamic = false;
  bool no_pfilter = false;
  bool label_based = false;
  std::vector<std::string> overrides;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  OdometryConfig config;
  if (!a.config_path.empty()) config = load_config(a.config_path);
  if (a.no_semantic) config.semantic_filter = false;
  if (a.no_dynamic) config.dynamic_filter = false;
  if (a.no_pfilter) config.pfilter = false;
  if (a.label_based) config.label_based_filter = true;
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(config, std::string_view(kv).substr(0, eq), std::string_view(kv).substr(eq + 1));
  }
  config.validate();
  const LabelTaxonomy taxonomy = resolve_taxonomy(config);

  const Sequence seq = load_sequence(a.in_dir);
  if (seq.frames.empty() || seq.frames.front().empty()) throw Error("run: frame 0 is empty");
  for (const auto& f : seq.frames) {
    for (const auto& p : f.points) {
      if (!taxonomy.contains(p.label)) {
        throw Error("run: frame " + std::to_string(f.frame_index) + " has label " + std::to_string(p.label) +
                    " outside taxonomy '" + taxonomy.id() + "'");
      }
    }
  }

  const auto start = std::chrono::steady_clock::now();
  const SequenceResult result = run_sequence(seq.frames, seq.spec, config, taxonomy);
  const double wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_trajectory(dir / "trajectory.traj", result.trajectory);
  auto [map_cloud, map_spec] = export_map(result.map);
  map_cloud.taxonomy_id = taxonomy.id();
  write_frame(dir / "map.socc", map_cloud, map_spec);

  std::string metrics =
      "frame,failed,snapshot_points,coarse_correspondences,refined_correspondences,coarse_iterations,"
      "refined_iterations,dynamic_clusters,frame_dynamic_points,map_dynamic_points,map_voxels\n";
  std::string timings = "frame,covariance_ms,snapshot_ms,coarse_ms,dynamic_ms,refined_ms,merge_ms,total_ms\n";
  StageTimings totals;
  for (const auto& f : result.frames) {
    metrics += std::to_string(f.frame_index) + ',' + (f.failed ? "1" : "0") + ',' + std::to_string(f.snapshot_points) +
               ',' + std::to_string(f.coarse_correspondences) + ',' + std::to_string(f.refined_correspondences) + ',' +
               std::to_string(f.coarse_iterations) + ',' + std::to_string(f.refined_iterations) + ',' +
               std::to_string(f.dynamic_clusters) + ',' + std::to_string(f.frame_dynamic_points) + ',' +
               std::to_string(f.map_dynamic_points) + ',' + std::to_string(f.map_voxels) + '\n';
    const auto& t = f.timings;
    timings += std::to_string(f.frame_index) + ',' + fmt_ms(t.covariance) + ',' + fmt_ms(t.snapshot) + ',' +
               fmt_ms(t.coarse) + ',' + fmt_ms(t.dynamic) + ',' + fmt_ms(t.refined) + ',' + fmt_ms(t.merge) + ',' +
               fmt_ms(t.total) + '\n';
    totals.covariance += t.covariance;
    totals.snapshot += t.snapshot;
    totals.coarse += t.coarse;
    totals.dynamic += t.dynamic;
    totals.refined += t.refined;
    totals.merge += t.merge;
    totals.total += t.total;
  }
  write_text(dir / "metrics.csv", metrics);
  write_text(dir / "timings.csv", timings);

  // The manifest is itself a config file: rerun with --config manifest.txt.
  std::string manifest;
  manifest += "# occreg run manifest\n";
  manifest += "# tool_version: " + std::string(kToolVersion) + "\n";
  manifest += "# input: " + fs::absolute(a.in_dir).string() + "\n";
  manifest += "# frames: " + std::to_string(seq.frames.size()) + "\n";
  manifest += "# failed_frames: " + std::to_string(result.failed_frames) + "\n";
  manifest += "# taxonomy_id: " + taxonomy.id() + "\n";
  manifest += "# threads: " + std::to_string(thread_limit()) + "\n";
  manifest += "# wall_ms: " + fmt_ms(wall_ms) + "\n";
  manifest += "# stage_totals_ms: covariance=" + fmt_ms(totals.covariance) + " snapshot=" + fmt_ms(totals.snapshot) +
              " coarse=" + fmt_ms(totals.coarse) + " dynamic=" + fmt_ms(totals.dynamic) + " refined=" +
              fmt_ms(totals.refined) + " merge=" + fmt_ms(totals.merge) + "\n";
  manifest += format_config(config);
  write_text(dir / "manifest.txt", manifest);

  out << "frames: " << seq.frames.size() << "\nfailed_frames: " << result.failed_frames
      << "\nmap_voxels: " << result.map.size() << "\nmean_frame_ms: "
      << fmt_ms(totals.total / static_cast<double>(result.frames.size())) << "\n";
  if (!seq.gaps.empty()) out << "missing_frames: " << seq.gaps.size() << "\n";
  return result.failed_frames > 0 ? kExitFrameFailures : kExitOk;
}

struct SynthArgs {
  std::string preset = "urban-block";
  int frames = 40;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string scene;
  double flip = 0.0;
  double dropout = 0.0;
  double spurious = 0.0;
  double frustum = 0.0;
  bool no_bus = false;
  int moving = 3;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.frames <= 0) throw Error("synth: --frames must be positive");
  if (a.frames < 2) throw Error("synth: a sequence needs at least two frames");
  const LabelTaxonomy& taxonomy = LabelTaxonomy::occ3d_default();
  PresetOptions opt;
  opt.frames = static_cast<std::uint32_t>(a.frames);
  opt.seed = a.seed;
  opt.stationary_bus = !a.no_bus;
  opt.moving_actors = static_cast<std::size_t>(std::max(0, a.moving));
  Scenario sc = make_preset(a.preset, opt, taxonomy);
  if (!a.scene.empty()) sc.world = load_scene(a.scene, taxonomy);

  NoiseModel noise;
  noise.label_flip_rate = a.flip;
  noise.dropout_rate = a.dropout;
  noise.spurious_rate = a.spurious;
  noise.frustum_range = a.frustum;
  noise.seed = a.seed;
  const VoxelGridSpec spec;
  const GeneratedSequence seq = generate_sequence(sc.world, sc.trajectory, spec, noise, taxonomy);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  for (const auto& f : seq.frames) write_frame(dir / frame_filename(f.frame_index), f, spec);
  write_trajectory(dir / "gt.traj", seq.ground_truth);

  const GeneratedSequence clean = noise.enabled()
                                      ? generate_sequence(sc.world, sc.trajectory, spec, NoiseModel{}, taxonomy)
                                      : seq;
  const GroundTruthMap gt = assemble_ground_truth_map(clean.frames, clean.ground_truth, spec, taxonomy);
  write_frame(dir / "gt_map.socc", gt.cloud, gt.spec);

  std::size_t points = 0;
  for (const auto& f : seq.frames) points += f.size();
  out << "preset: " << sc.name << "\nframes: " << seq.frames.size() << "\nmean_points: "
      << points / seq.frames.size() << "\ngt_map_points: " << gt.cloud.size() << "\n";
  return kExitOk;
}

int cmd_eval_traj(const std::string& est, const std::string& gt, const std::string& align, const std::string& csv,
                  std::ostream& out) {
  const Alignment alignment = parse_alignment(align);
  const ApeReport report = ape(read_trajectory(est), read_trajectory(gt), alignment);
  out << format_report(report);
  if (!csv.empty()) {
    std::ofstream f(csv);
    if (!f) throw IoError(IoErrorKind::open_failed, "cannot write " + csv);
    write_ape_csv(f, report);
  }
  return kExitOk;
}

int cmd_eval_map(const std::string& map, const std::string& gt, double threshold, std::ostream& out) {
  const auto rec = read_frame(map).cloud.positions();
  const auto ref = read_frame(gt).cloud.positions();
  out << format_report(map_metrics(rec, ref, threshold));
  return kExitOk;
}

int cmd_info(const std::string& file, std::ostream& out) {
  out << "tool_version: " << kToolVersion << "\n";
  out << "socc_version: " << kSoccVersion << "\n";
  out << "socc_header_bytes: " << kSoccHeaderBytes << "\n";
  out << "socc_record_bytes: " << kSoccRecordBytes << "\n";
  out << "trajectory_format: index tx ty tz qx qy qz qw\n";
  out << "taxonomy: " << LabelTaxonomy::occ3d_default().id() << " (" << LabelTaxonomy::occ3d_default().entries().size()
      << " classes)\n";
  out << "threads: " << thread_limit() << "\n";
  if (file.empty()) return kExitOk;
  const fs::path path(file);
  if (path.extension() == ".traj") {
    const Trajectory t = read_trajectory(path);
    out << "file: " << file << "\nposes: " << t.size() << "\n";
    if (!t.empty()) out << "frames: " << t.front().frame_index << ".." << t.back().frame_index << "\n";
    return kExitOk;
  }
  const OccupancyFrame f = read_frame(path);
  out << "file: " << file << "\nframe_index: " << f.cloud.frame_index << "\npoints: " << f.cloud.size()
      << "\nvoxel_size: " << f.spec.voxel_size << "\nmin_bound: " << f.spec.min_bound.transpose()
      << "\ndims: " << f.spec.dims.transpose() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic occupancy odometry and mapping"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Estimate a trajectory and map from a .socc sequence");
  run_cmd->add_option("--in", run.in_dir, "Directory of frame_NNNNNN.socc files")->required();
  run_cmd->add_option("--out", run.out_dir, "Output directory")->required();
  run_cmd->add_option("--config", run.config_path, "key = value config file");
  run_cmd->add_flag("--no-semantic-filter", run.no_semantic, "Disable the semantic label filter");
  run_cmd->add_flag("--no-dynamic-filter", run.no_dynamic, "Disable the dynamic object filter");
  run_cmd->add_flag("--no-pfilter", run.no_pfilter, "Disable the voxel persistence filter");
  run_cmd->add_flag("--label-based-filter", run.label_based, "Drop all movable points instead");
  run_cmd->add_option("--set", run.overrides, "Override a config key (key=value), repeatable");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sequence");
  synth_cmd->add_option("--preset", synth.preset, "urban-block | dynamic-traffic | slip-road")
      ->check(CLI::IsMember(preset_names()));
  synth_cmd->add_option("--frames", synth.frames, "Number of frames");
  synth_cmd->add_option("--seed", synth.seed, "Seed for layout jitter and noise");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--scene", synth.scene, "Scene file replacing the preset world");
  synth_cmd->add_option("--flip", synth.flip, "Label flip rate");
  synth_cmd->add_option("--dropout", synth.dropout, "Dropout rate");
  synth_cmd->add_option("--spurious", synth.spurious, "Expected spurious voxels per frame");
  synth_cmd->add_option("--frustum", synth.frustum, "Range beyond which voxels start dropping (0 = off)");
  synth_cmd->add_flag("--no-bus", synth.no_bus, "dynamic-traffic: omit the parked bus");
  synth_cmd->add_option("--moving", synth.moving, "dynamic-traffic: number of moving actors (0-3)");

  std::string est, gt, align = "umeyama", csv;
  auto* traj_cmd = app.add_subcommand("eval-traj", "APE of an estimated trajectory");
  traj_cmd->add_option("--est", est, "Estimated .traj")->required();
  traj_cmd->add_option("--gt", gt, "Ground-truth .traj")->required();
  traj_cmd->add_option("--align", align, "none | first | umeyama");
  traj_cmd->add_option("--csv", csv, "Per-frame APE CSV output");

  std::string map, gt_map;
  double threshold = kMapThresholdMeters;
  auto* map_cmd = app.add_subcommand("eval-map", "Accuracy, precision and completion of a map");
  map_cmd->add_option("--map", map, "Reconstructed map .socc")->required();
  map_cmd->add_option("--gt-map", gt_map, "Ground-truth map .socc")->required();
  map_cmd->add_option("--threshold", threshold, "Distance threshold in meters");

  std::string info_file;
  auto* info_cmd = app.add_subcommand("info", "Print format and version information");
  info_cmd->add_option("file", info_file, "Optional .socc or .traj file to describe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }

  try {
    if (*run_cmd) return cmd_run(run, out);
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*traj_cmd) return cmd_eval_traj(est, gt, align, csv, out);
    if (*map_cmd) return cmd_eval_map(map, gt_map, threshold, out);
    if (*info_cmd) return cmd_info(info_file, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}

}  // namespace occreg
