#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occreg/config.hpp"
#include "occreg/occ_io.hpp"
#include "occreg/taxonomy.hpp"
#include "occreg/voxel_map.hpp"

namespace occreg {

/// Wall-clock milliseconds per stage. Never part of deterministic output.
struct StageTimings {
  double covariance = 0.0;
  double snapshot = 0.0;
  double coarse = 0.0;
  double dynamic = 0.0;
  double refined = 0.0;
  double merge = 0.0;
  double total = 0.0;
};

struct FrameResult {
  std::uint32_t frame_index = 0;
  Pose pose;
  Pose predicted;
  Pose coarse_pose;
  bool failed = false;
  std::string failure;
  std::size_t snapshot_points = 0;
  std::size_t coarse_correspondences = 0;
  std::size_t refined_correspondences = 0;
  int coarse_iterations = 0;
  int refined_iterations = 0;
  std::size_t dynamic_clusters = 0;
  std::size_t frame_dynamic_points = 0;
  std::size_t map_dynamic_points = 0;
  std::size_t map_voxels = 0;
  StageTimings timings;
};

/// Frame-to-map odometry: each frame is registered against the persistent
/// part of the global map, then merged at the refined pose.
class Odometry {
 public:
  Odometry(OdometryConfig config, LabelTaxonomy taxonomy);

  /// Seeds the map with `first` at identity. Throws Error on an empty frame.
  FrameResult initialize(const SemanticPointCloud& first, const VoxelGridSpec& spec);
  /// Registers and merges one frame. Registration failure is recorded in the
  /// result; the pose falls back to the motion prediction and the map is untouched.
  FrameResult process_frame(const SemanticPointCloud& cloud);

  bool initialized() const { return initialized_; }
  const OdometryConfig& config() const { return config_; }
  const GlobalMap& map() const { return map_; }
  const Trajectory& trajectory() const { return trajectory_; }
  Pose predict() const;

  std::vector<std::uint8_t> save_state() const;
  void load_state(const std::vector<std::uint8_t>& bytes);

 private:
  OdometryConfig config_;
  LabelTaxonomy taxonomy_;
  GlobalMap map_;
  Trajectory trajectory_;
  std::uint32_t merged_frames_ = 0;
  bool initialized_ = false;
};

struct SequenceResult {
  Trajectory trajectory;
  GlobalMap map;
  std::vector<FrameResult> frames;
  std::size_t failed_frames = 0;
};

/// Throws Error when fewer than 2 frames are given or frame 0 is empty.
SequenceResult run_sequence(const std::vector<SemanticPointCloud>& frames, const VoxelGridSpec& spec,
                            const OdometryConfig& config, const LabelTaxonomy& taxonomy);

/// Taxonomy selected by config.taxonomy (built-in set when empty).
LabelTaxonomy resolve_taxonomy(const OdometryConfig& config);

}  // namespace occreg
