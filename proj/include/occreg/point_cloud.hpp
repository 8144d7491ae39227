#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "occreg/voxel_grid.hpp"

namespace occreg {

using Label = std::uint8_t;

struct SemanticPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Label label = 0;

  bool operator==(const SemanticPoint&) const = default;
};

/// One occupancy frame seen as a point cloud of occupied voxel centers.
struct SemanticPointCloud {
  std::vector<SemanticPoint> points;
  std::uint32_t frame_index = 0;
  std::string taxonomy_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  std::vector<Eigen::Vector3d> positions() const;
  std::vector<Label> labels() const;

  bool operator==(const SemanticPointCloud&) const = default;
};

/// Returns an empty string when every point maps to a distinct in-range voxel,
/// otherwise a description of the first violation.
std::string check_voxel_uniqueness(const SemanticPointCloud& cloud, const VoxelGridSpec& spec);

}  // namespace occreg
