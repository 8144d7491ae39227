#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "occreg/occ_io.hpp"
#include "occreg/point_cloud.hpp"
#include "occreg/pose.hpp"
#include "occreg/taxonomy.hpp"
#include "occreg/voxel_grid.hpp"

namespace occreg {

enum class PrimitiveKind {
  box,     // oriented box, extent = half sizes
  column,  // vertical cylinder, extent = (radius, unused, half height)
  strip,   // ground patch: a box whose z half size is fixed to 0.2
};

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::box;
  Label label = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  Eigen::Vector3d extent = Eigen::Vector3d::Ones();
  /// Meters per frame; only meaningful for actors.
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct WorldModel {
  std::vector<Primitive> statics;
  std::vector<Primitive> actors;
};

struct NoiseModel {
  double label_flip_rate = 0.0;
  double dropout_rate = 0.0;
  /// Expected spurious voxels per frame.
  double spurious_rate = 0.0;
  std::uint64_t seed = 0;
  /// When positive, points farther than this from the ego are dropped with
  /// probability growing linearly to 1 at twice the range.
  double frustum_range = 0.0;

  bool enabled() const;
  void validate() const;
};

/// std::mt19937_64 seeded by mixing (seed, stream). Distributions are
/// implemented locally so sequences are identical across standard libraries.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  std::uint64_t below(std::uint64_t n);  // [0, n)
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

/// Occupied voxels of `world` seen from `ego_pose` (world-from-ego), in the
/// ego frame. A voxel is occupied when its center lies inside a primitive;
/// overlapping primitives resolve to the one whose surface is nearest the
/// center, and exact ties to the later primitive. Points come out in
/// linear-index order.
SemanticPointCloud render_frame(const WorldModel& world, const Pose& ego_pose, const VoxelGridSpec& spec,
                                std::uint32_t actor_time);

/// Dropout, then label flips, then spurious voxels, all drawn from
/// (noise.seed, cloud.frame_index). `labels` is the pool for flips and
/// spurious points.
SemanticPointCloud apply_noise(const SemanticPointCloud& cloud, const NoiseModel& noise, const VoxelGridSpec& spec,
                               const std::vector<Label>& labels);

struct GeneratedSequence {
  std::vector<SemanticPointCloud> frames;
  Trajectory ground_truth;
};

/// Frame i is rendered at trajectory[i] with actors at time i. Throws Error
/// for fewer than 2 poses.
GeneratedSequence generate_sequence(const WorldModel& world, const std::vector<Pose>& trajectory,
                                    const VoxelGridSpec& spec, const NoiseModel& noise,
                                    const LabelTaxonomy& taxonomy);

struct Scenario {
  std::string name;
  WorldModel world;
  std::vector<Pose> trajectory;
};

struct PresetOptions {
  std::uint32_t frames = 40;
  std::uint64_t seed = 0;
  /// dynamic-traffic only.
  bool stationary_bus = true;
  std::size_t moving_actors = 3;
};

std::vector<std::string> preset_names();
/// Throws Error for an unknown name or zero frames.
Scenario make_preset(std::string_view name, const PresetOptions& options, const LabelTaxonomy& taxonomy);

/// One primitive per line: `kind label x y z yaw ex ey ez [vx vy vz]`, where
/// kind is static-box|static-column|static-strip|actor and label is a class
/// name or id. `#` starts a comment.
WorldModel parse_scene(std::string_view text, const LabelTaxonomy& taxonomy);
WorldModel load_scene(const std::filesystem::path& path, const LabelTaxonomy& taxonomy);

struct GroundTruthMap {
  SemanticPointCloud cloud;
  VoxelGridSpec spec;
  /// Frame points whose world voxel was already claimed by another label.
  std::size_t label_conflicts = 0;
};

/// Merges the static (non-movable) points of noise-free frames at their
/// ground-truth poses into one world map.
GroundTruthMap assemble_ground_truth_map(const std::vector<SemanticPointCloud>& frames, const Trajectory& poses,
                                         const VoxelGridSpec& frame_spec, const LabelTaxonomy& taxonomy);

}  // namespace occreg
