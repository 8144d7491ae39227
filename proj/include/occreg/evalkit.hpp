#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "occreg/occ_io.hpp"

namespace occreg {

enum class Alignment { none, first_pose, umeyama };

/// Accepts none|first|umeyama. Throws Error otherwise.
Alignment parse_alignment(std::string_view text);
const char* to_string(Alignment alignment);

inline constexpr double kSuccessApeMeters = 5.0;
inline constexpr double kMapThresholdMeters = 0.4;

struct ApeReport {
  std::vector<std::uint32_t> frames;  // matched frame indices, ascending
  std::vector<double> ape;            // translation error, meters
  std::vector<double> rotation_error_deg;
  double rmse = 0.0;
  Alignment alignment = Alignment::umeyama;
  /// Applied to the estimate before errors are measured.
  Pose alignment_transform;
  bool success = false;
  std::size_t estimate_poses = 0;
  std::size_t ground_truth_poses = 0;
};

/// Rigid T (no scale) minimizing sum |T src_i - dst_i|^2.
Pose umeyama_rigid(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst);

/// Errors over the frame indices present in both trajectories. success means
/// rmse < 5 m. Throws Error when no index is shared.
ApeReport ape(const Trajectory& estimate, const Trajectory& ground_truth, Alignment alignment = Alignment::umeyama);

/// Fraction of successful reports. Throws Error on an empty list.
double success_ratio(std::span<const ApeReport> reports);

struct MapMetrics {
  double accuracy = 0.0;          // RMSE of reconstructed -> nearest ground-truth distance
  double precision = 0.0;         // reconstructed points with that distance < threshold
  double completion_ratio = 0.0;  // ground-truth points with a reconstructed point closer than threshold
  double threshold = kMapThresholdMeters;
  std::size_t reconstructed_points = 0;
  std::size_t ground_truth_points = 0;
};

/// Geometric only; labels play no part. Throws Error if either set is empty.
MapMetrics map_metrics(std::span<const Eigen::Vector3d> reconstructed, std::span<const Eigen::Vector3d> ground_truth,
                       double threshold = kMapThresholdMeters);

/// `key: value` lines.
std::string format_report(const ApeReport& report);
std::string format_report(const MapMetrics& metrics);
/// `frame,ape_m,rot_err_deg` rows.
void write_ape_csv(std::ostream& out, const ApeReport& report);

}  // namespace occreg
