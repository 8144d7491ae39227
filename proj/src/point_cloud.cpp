#include "occreg/point_cloud.hpp"

#include <vector>

namespace occreg {

std::vector<Eigen::Vector3d> SemanticPointCloud::positions() const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.position);
  return out;
}

std::vector<Label> SemanticPointCloud::labels() const {
  std::vector<Label> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.label);
  return out;
}

std::string check_voxel_uniqueness(const SemanticPointCloud& cloud, const VoxelGridSpec& spec) {
  std::vector<bool> seen(static_cast<std::size_t>(spec.cell_count()), false);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto idx = voxel_of(spec, cloud.points[i].position);
    if (!idx) return "point " + std::to_string(i) + " lies outside the grid";
    const auto lin = static_cast<std::size_t>(linear_index(spec, *idx));
    if (seen[lin]) return "point " + std::to_string(i) + " shares a voxel with an earlier point";
    seen[lin] = true;
  }
  return {};
}

}  // namespace occreg
