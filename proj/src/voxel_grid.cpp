#include "occreg/voxel_grid.hpp"

#include <cmath>

#include "occreg/error.hpp"

namespace occreg {

bool VoxelGridSpec::valid() const {
  return std::isfinite(voxel_size) && voxel_size > 0.0 && min_bound.allFinite() && (dims.array() >= 1).all();
}

void VoxelGridSpec::validate() const {
  if (!valid()) throw GeometryError("invalid voxel grid spec");
}

bool VoxelGridSpec::contains(const VoxelIndex& idx) const {
  return (idx.array() >= 0).all() && (idx.array() < dims.array()).all();
}

std::int64_t VoxelGridSpec::cell_count() const {
  return static_cast<std::int64_t>(dims.x()) * dims.y() * dims.z();
}

Eigen::Vector3d VoxelGridSpec::max_bound() const { return min_bound + dims.cast<double>() * voxel_size; }

bool VoxelGridSpec::operator==(const VoxelGridSpec& other) const {
  return voxel_size == other.voxel_size && min_bound == other.min_bound && dims == other.dims;
}

std::optional<VoxelIndex> voxel_of(const VoxelGridSpec& spec, const Eigen::Vector3d& x) {
  VoxelIndex idx;
  for (int a = 0; a < 3; ++a) {
    double q = (x[a] - spec.min_bound[a]) / spec.voxel_size;
    if (!std::isfinite(q)) return std::nullopt;
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q))) q = r;
    const double f = std::floor(q);
    if (f < 0.0 || f >= static_cast<double>(spec.dims[a])) return std::nullopt;
    idx[a] = static_cast<int>(f);
  }
  return idx;
}

Eigen::Vector3d voxel_center(const VoxelGridSpec& spec, const VoxelIndex& idx) {
  if (!spec.contains(idx)) throw GeometryError("voxel_center: index out of range");
  return spec.min_bound + (idx.cast<double>().array() + 0.5).matrix() * spec.voxel_size;
}

}  // namespace occreg
