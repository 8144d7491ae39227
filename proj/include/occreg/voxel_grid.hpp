#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

namespace occreg {

using VoxelIndex = Eigen::Vector3i;

/// Regular grid over the half-open box [min_bound, min_bound + dims * voxel_size).
struct VoxelGridSpec {
  double voxel_size = 0.4;
  Eigen::Vector3d min_bound{-40.0, -40.0, -1.0};
  Eigen::Vector3i dims{200, 200, 16};

  bool valid() const;
  /// Throws GeometryError if not valid().
  void validate() const;
  bool contains(const VoxelIndex& idx) const;
  std::int64_t cell_count() const;
  Eigen::Vector3d max_bound() const;

  bool operator==(const VoxelGridSpec& other) const;
};

/// floor((x - min_bound) / voxel_size) per axis, or nullopt outside the grid.
/// Quotients within 1e-9 of an integer snap to it, so points sitting on a cell
/// face land in the upper cell despite rounding in the division.
std::optional<VoxelIndex> voxel_of(const VoxelGridSpec& spec, const Eigen::Vector3d& x);

/// Throws GeometryError for an index outside dims.
Eigen::Vector3d voxel_center(const VoxelGridSpec& spec, const VoxelIndex& idx);

/// Row-major linear id (x slowest); only valid for contained indices.
inline std::int64_t linear_index(const VoxelGridSpec& spec, const VoxelIndex& idx) {
  return (static_cast<std::int64_t>(idx.x()) * spec.dims.y() + idx.y()) * spec.dims.z() + idx.z();
}

}  // namespace occreg
