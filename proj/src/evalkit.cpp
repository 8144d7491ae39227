#include "occreg/evalkit.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>

#include "occreg/parallel.hpp"
#include "occreg/spatial_index.hpp"

namespace occreg {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Nearest distance from each query point to `reference`, computed in fixed
/// blocks so the result is independent of the thread count.
std::vector<double> nearest_distances(std::span<const Eigen::Vector3d> queries, const KdTree& reference) {
  std::vector<double> out(queries.size());
  parallel_blocks(queries.size(), 4096, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = reference.nearest(queries[i], std::numeric_limits<double>::infinity())->distance;
    }
  });
  return out;
}

}  // namespace

Alignment parse_alignment(std::string_view text) {
  if (text == "none") return Alignment::none;
  if (text == "first") return Alignment::first_pose;
  if (text == "umeyama") return Alignment::umeyama;
  throw Error("unknown alignment '" + std::string(text) + "' (expected none, first or umeyama)");
}

const char* to_string(Alignment alignment) {
  switch (alignment) {
    case Alignment::none:
      return "none";
    case Alignment::first_pose:
      return "first";
    case Alignment::umeyama:
      break;
  }
  return "umeyama";
}

Pose umeyama_rigid(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  if (src.size() != dst.size() || src.empty()) throw Error("umeyama_rigid: need equally sized non-empty sets");
  const auto n = static_cast<Eigen::Index>(src.size());
  if (n < 3) {
    Eigen::Vector3d shift = Eigen::Vector3d::Zero();
    for (Eigen::Index i = 0; i < n; ++i) shift += dst[i] - src[i];
    return Pose::from_translation(shift / static_cast<double>(n));
  }
  Eigen::Matrix3Xd a(3, n), b(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.col(i) = src[i];
    b.col(i) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, false);
  return Pose(Eigen::Quaterniond(Eigen::Matrix3d(t.topLeftCorner<3, 3>())), t.topRightCorner<3, 1>());
}

ApeReport ape(const Trajectory& estimate, const Trajectory& ground_truth, Alignment alignment) {
  std::map<std::uint32_t, const Pose*> gt;
  for (const auto& e : ground_truth) gt[e.frame_index] = &e.pose;
  std::map<std::uint32_t, std::pair<const Pose*, const Pose*>> matched;
  for (const auto& e : estimate) {
    if (auto it = gt.find(e.frame_index); it != gt.end()) matched[e.frame_index] = {&e.pose, it->second};
  }
  if (matched.empty()) throw Error("ape: estimate and ground truth share no frame index");

  ApeReport report;
  report.alignment = alignment;
  report.estimate_poses = estimate.size();
  report.ground_truth_poses = ground_truth.size();
  std::vector<Eigen::Vector3d> est_t, gt_t;
  for (const auto& [frame, pair] : matched) {
    report.frames.push_back(frame);
    est_t.push_back(pair.first->translation);
    gt_t.push_back(pair.second->translation);
  }
  switch (alignment) {
    case Alignment::none:
      break;
    case Alignment::first_pose: {
      const auto& first = matched.begin()->second;
      report.alignment_transform = *first.second * first.first->inverse();
      break;
    }
    case Alignment::umeyama:
      report.alignment_transform = umeyama_rigid(est_t, gt_t);
      break;
  }

  double sum_sq = 0.0;
  for (const auto& [frame, pair] : matched) {
    const Pose aligned = report.alignment_transform * *pair.first;
    const double e = (aligned.translation - pair.second->translation).norm();
    report.ape.push_back(e);
    report.rotation_error_deg.push_back(rotation_angle_between(aligned, *pair.second) * 180.0 / std::numbers::pi);
    sum_sq += e * e;
  }
  report.rmse = std::sqrt(sum_sq / static_cast<double>(report.ape.size()));
  report.success = report.rmse < kSuccessApeMeters;
  return report;
}

double success_ratio(std::span<const ApeReport> reports) {
  if (reports.empty()) throw Error("success_ratio: no reports");
  std::size_t ok = 0;
  for (const auto& r : reports) ok += r.success ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(reports.size());
}

MapMetrics map_metrics(std::span<const Eigen::Vector3d> reconstructed, std::span<const Eigen::Vector3d> ground_truth,
                       double threshold) {
  if (reconstructed.empty() || ground_truth.empty()) throw Error("map_metrics: both point sets must be non-empty");
  if (!(threshold > 0.0)) throw Error("map_metrics: threshold must be positive");
  const KdTree gt_index(ground_truth);
  const KdTree rec_index(reconstructed);
  const auto rec_to_gt = nearest_distances(reconstructed, gt_index);
  const auto gt_to_rec = nearest_distances(ground_truth, rec_index);

  MapMetrics m;
  m.threshold = threshold;
  m.reconstructed_points = reconstructed.size();
  m.ground_truth_points = ground_truth.size();
  double sum_sq = 0.0;
  std::size_t close = 0;
  for (double d : rec_to_gt) {
    sum_sq += d * d;
    close += d < threshold ? 1 : 0;
  }
  m.accuracy = std::sqrt(sum_sq / static_cast<double>(rec_to_gt.size()));
  m.precision = static_cast<double>(close) / static_cast<double>(rec_to_gt.size());
  std::size_t covered = 0;
  for (double d : gt_to_rec) covered += d < threshold ? 1 : 0;
  m.completion_ratio = static_cast<double>(covered) / static_cast<double>(gt_to_rec.size());
  return m;
}

std::string format_report(const ApeReport& r) {
  double max_ape = 0.0;
  for (double e : r.ape) max_ape = std::max(max_ape, e);
  std::string out;
  out += "metric: ape\n";
  out += "alignment: " + std::string(to_string(r.alignment)) + "\n";
  out += "matched_poses: " + std::to_string(r.ape.size()) + "\n";
  out += "estimate_poses: " + std::to_string(r.estimate_poses) + "\n";
  out += "ground_truth_poses: " + std::to_string(r.ground_truth_poses) + "\n";
  out += "rmse_m: " + num(r.rmse) + "\n";
  out += "max_m: " + num(max_ape) + "\n";
  out += "success: " + std::string(r.success ? "true" : "false") + "\n";
  return out;
}

std::string format_report(const MapMetrics& m) {
  std::string out;
  out += "metric: map\n";
  out += "threshold_m: " + num(m.threshold) + "\n";
  out += "reconstructed_points: " + std::to_string(m.reconstructed_points) + "\n";
  out += "ground_truth_points: " + std::to_string(m.ground_truth_points) + "\n";
  out += "accuracy_m: " + num(m.accuracy) + "\n";
  out += "precision: " + num(m.precision) + "\n";
  out += "completion_ratio: " + num(m.completion_ratio) + "\n";
  return out;
}

void write_ape_csv(std::ostream& out, const ApeReport& r) {
  out << "frame,ape_m,rot_err_deg\n";
  for (std::size_t i = 0; i < r.ape.size(); ++i) {
    out << r.frames[i] << ',' << num(r.ape[i]) << ',' << num(r.rotation_error_deg[i]) << '\n';
  }
}

}  // namespace occreg
