#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occreg/error.hpp"
#include "occreg/point_cloud.hpp"
#include "occreg/pose.hpp"
#include "occreg/voxel_grid.hpp"

namespace occreg {

enum class IoErrorKind {
  open_failed,
  bad_magic,
  version_mismatch,
  truncated,
  invalid_header,
  index_out_of_range,
  duplicate_voxel,
  trailing_data,
  invalid_cloud,
  malformed_line,
  non_monotone_index,
  non_unit_quaternion,
  empty_directory,
  inconsistent_spec,
};

const char* to_string(IoErrorKind kind);

class IoError : public Error {
 public:
  IoError(IoErrorKind kind, const std::string& what);
  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

/// `.socc` layout, little-endian:
///   "SOCC" | u32 version | f64 voxel_size | 3 x f64 min_bound | 3 x u32 dims |
///   u32 frame_index | u32 count | count x (u16 i, u16 j, u16 k, u8 label)
inline constexpr std::uint32_t kSoccVersion = 1;
inline constexpr std::size_t kSoccHeaderBytes = 60;
inline constexpr std::size_t kSoccRecordBytes = 7;

struct OccupancyFrame {
  SemanticPointCloud cloud;
  VoxelGridSpec spec;
};

std::vector<std::uint8_t> encode_frame(const SemanticPointCloud& cloud, const VoxelGridSpec& spec);
OccupancyFrame decode_frame(const std::vector<std::uint8_t>& bytes);

/// Point positions are snapped to voxel indices; clouds built from voxel
/// centers round-trip exactly.
void write_frame(const std::filesystem::path& path, const SemanticPointCloud& cloud, const VoxelGridSpec& spec);
OccupancyFrame read_frame(const std::filesystem::path& path);

struct TrajectoryEntry {
  std::uint32_t frame_index = 0;
  Pose pose;
};
using Trajectory = std::vector<TrajectoryEntry>;

/// One line per pose: `index tx ty tz qx qy qz qw`, 9 significant digits.
std::string format_trajectory_line(const TrajectoryEntry& entry);
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_trajectory(const std::filesystem::path& path);
Trajectory parse_trajectory(const std::string& text);

struct Sequence {
  std::vector<SemanticPointCloud> frames;
  VoxelGridSpec spec;
  /// Frame indices missing between the first and last frame.
  std::vector<std::uint32_t> gaps;
};

/// Loads every `frame_NNNNNN.socc` in `dir`, sorted by header frame index.
Sequence load_sequence(const std::filesystem::path& dir);

std::string frame_filename(std::uint32_t frame_index);

}  // namespace occreg
