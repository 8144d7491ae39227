#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "occreg/point_cloud.hpp"
#include "occreg/pose.hpp"
#include "occreg/registration.hpp"
#include "occreg/voxel_grid.hpp"

namespace occreg {

using VoxelKey = Eigen::Vector3i;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(k.x());
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.y());
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.z());
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

struct VoxelKeyEqual {
  bool operator()(const VoxelKey& a, const VoxelKey& b) const noexcept { return a == b; }
};

struct MapVoxel {
  VoxelKey key = VoxelKey::Zero();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Label label = 0;
  std::uint32_t t0 = 0;
  std::uint32_t f = 1;
  /// Last observed surface covariance, in world coordinates.
  PointCovariance covariance = PointCovariance::Identity();
  /// Per-label observation counts driving the majority label.
  std::vector<std::pair<Label, std::uint32_t>> label_counts;
};

/// f / (t - t0 + 1). Throws Error when t < t0.
double p_index(const MapVoxel& voxel, std::uint32_t t);

struct MergeReport {
  std::size_t created = 0;
  std::size_t updated = 0;
  std::size_t relabeled = 0;
};

/// Registration target drawn from the map: one point per selected voxel.
struct MapSnapshot {
  std::vector<Eigen::Vector3d> points;
  std::vector<Label> labels;
  std::vector<PointCovariance> covariances;
  /// Slot in GlobalMap::voxels() of each point.
  std::vector<std::size_t> slots;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Voxel-hashed semantic map over an unbounded world grid. Keys are
/// floor((x - anchor) / voxel_size); voxels are stored in insertion order so
/// every traversal is deterministic.
class GlobalMap {
 public:
  GlobalMap() = default;
  GlobalMap(double voxel_size, const Eigen::Vector3d& anchor);

  double voxel_size() const { return voxel_size_; }
  const Eigen::Vector3d& anchor() const { return anchor_; }
  /// Frame index of the latest merge.
  std::uint32_t t() const { return t_; }
  bool has_frames() const { return has_frames_; }
  std::size_t size() const { return voxels_.size(); }
  bool empty() const { return voxels_.empty(); }
  const std::vector<MapVoxel>& voxels() const { return voxels_; }
  const MapVoxel* find(const VoxelKey& key) const;

  VoxelKey key_of(const Eigen::Vector3d& x) const;
  Eigen::Vector3d key_center(const VoxelKey& key) const;

  /// Moves each point to world coordinates and folds it into its voxel. A
  /// voxel gains at most one observation per frame; points sharing a key are
  /// averaged first. `covariances` are frame-frame covariances (may be empty).
  MergeReport merge_frame(const SemanticPointCloud& cloud, const Pose& pose, std::uint32_t t,
                          std::span<const PointCovariance> covariances = {});

  /// Replaces persistent voxels sharing a coarse cell (edge 2 * voxel_size)
  /// with one voxel at their p-Index-weighted mean; deletes transient voxels.
  void downsample_persistent(std::uint32_t t, double threshold);

  /// Rebuilds from raw voxels; used when restoring serialized state.
  static GlobalMap from_voxels(double voxel_size, const Eigen::Vector3d& anchor, std::uint32_t t, bool has_frames,
                               std::vector<MapVoxel> voxels);

 private:
  void rebuild_index();

  double voxel_size_ = 0.4;
  Eigen::Vector3d anchor_ = Eigen::Vector3d::Zero();
  std::uint32_t t_ = 0;
  bool has_frames_ = false;
  std::vector<MapVoxel> voxels_;
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash, VoxelKeyEqual> index_;
};

/// P_V over world points: true iff the containing voxel exists and its p-Index
/// at t exceeds threshold.
std::function<bool(const Eigen::Vector3d&)> persistence_predicate(const GlobalMap& map, std::uint32_t t,
                                                                  double threshold);

/// P_V as a correspondence predicate over a target point array.
CorrespondencePredicate persistence_predicate(const GlobalMap& map, std::uint32_t t, double threshold,
                                              std::span<const Eigen::Vector3d> target_points);

MapSnapshot extract_persistent(const GlobalMap& map, std::uint32_t t, double threshold);
MapSnapshot all_voxels(const GlobalMap& map);

/// Points whose position lies in the axis-aligned cube of half-width radius.
MapSnapshot local_crop(const MapSnapshot& snapshot, const Eigen::Vector3d& center, double radius);

SemanticPointCloud to_cloud(const MapSnapshot& snapshot, std::uint32_t frame_index);

/// Map as an occupancy frame: voxel centers on a grid spanning the occupied
/// keys, frame_index = map.t(). Throws Error if an axis exceeds 65535 cells.
std::pair<SemanticPointCloud, VoxelGridSpec> export_map(const GlobalMap& map);

}  // namespace occreg
