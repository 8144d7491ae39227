#pragma once

// Independent reference implementations used as test oracles. Everything here
// is deliberately brute force.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "occreg/pose.hpp"

namespace testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 engine(20240611);
  return engine;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

inline Eigen::Vector3d random_vector(double half) { return {uniform(-half, half), uniform(-half, half), uniform(-half, half)}; }

inline Eigen::Vector3d random_unit() {
  for (;;) {
    const Eigen::Vector3d v = random_vector(1.0);
    if (v.norm() > 0.1 && v.norm() <= 1.0) return v.normalized();
  }
}

inline occreg::Pose random_pose(double max_angle, double max_translation) {
  const Eigen::AngleAxisd aa(uniform(0.0, max_angle), random_unit());
  Eigen::Vector3d t = random_unit() * uniform(0.0, max_translation);
  return occreg::Pose(Eigen::Quaterniond(aa), t);
}

struct ScanHit {
  std::size_t id;
  double d2;
};

// Smallest (d2, id) with d2 <= max_d2.
template <class Accept>
std::optional<ScanHit> scan_nearest(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& q, double max_dist,
                                    Accept accept) {
  std::optional<ScanHit> best;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d2 = (pts[i] - q).squaredNorm();
    if (d2 > max_dist * max_dist || !accept(i)) continue;
    if (!best || d2 < best->d2) best = ScanHit{i, d2};
  }
  return best;
}

inline std::optional<ScanHit> scan_nearest(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& q,
                                           double max_dist) {
  return scan_nearest(pts, q, max_dist, [](std::size_t) { return true; });
}

inline std::vector<ScanHit> scan_knn(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& q, std::size_t k) {
  std::vector<ScanHit> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({i, (pts[i] - q).squaredNorm()});
  std::sort(all.begin(), all.end(), [](const ScanHit& a, const ScanHit& b) { return a.d2 < b.d2 || (a.d2 == b.d2 && a.id < b.id); });
  all.resize(std::min(k, all.size()));
  return all;
}

// Connected components over all pairs with distance <= radius, via union-find.
inline std::vector<std::vector<std::size_t>> union_find_components(const std::vector<Eigen::Vector3d>& pts,
                                                                   const std::vector<std::size_t>& ids, double radius) {
  std::vector<std::size_t> parent(ids.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      if ((pts[ids[a]] - pts[ids[b]]).norm() <= radius) parent[find(a)] = find(b);
    }
  }
  std::vector<std::vector<std::size_t>> groups(ids.size());
  for (std::size_t a = 0; a < ids.size(); ++a) groups[find(a)].push_back(ids[a]);
  std::vector<std::vector<std::size_t>> out;
  for (auto& g : groups) {
    if (g.empty()) continue;
    std::sort(g.begin(), g.end());
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("occreg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_pose_diff(const occreg::Pose& a, const occreg::Pose& b) {
  double m = (a.translation - b.translation).cwiseAbs().maxCoeff();
  // q and -q are the same rotation.
  const double s = a.rotation.coeffs().dot(b.rotation.coeffs()) < 0 ? -1.0 : 1.0;
  m = std::max(m, (a.rotation.coeffs() - s * b.rotation.coeffs()).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace testing
