#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace occreg {

/// Static kd-tree over 3D points. Read-only after construction, so concurrent
/// queries are safe. Distance ties resolve to the lower point id, which makes
/// every query agree exactly with a linear scan.
class KdTree {
 public:
  struct Neighbor {
    std::size_t id = 0;
    double distance = 0.0;
  };

  KdTree() = default;
  explicit KdTree(std::span<const Eigen::Vector3d> points, int leaf_size = 12);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::Vector3d& point(std::size_t id) const { return points_[id]; }
  const std::vector<Eigen::Vector3d>& points() const { return points_; }

  /// Nearest point with distance <= max_dist.
  std::optional<Neighbor> nearest(const Eigen::Vector3d& query, double max_dist,
                                  std::size_t hint = std::numeric_limits<std::size_t>::max()) const {
    return nearest_if(query, max_dist, [](std::size_t) { return true; }, hint);
  }

  /// Nearest point with distance <= max_dist among ids for which accept(id) holds.
  /// A likely answer in `hint` tightens the initial bound; the result is the same.
  template <class Accept>
  std::optional<Neighbor> nearest_if(const Eigen::Vector3d& query, double max_dist, Accept&& accept,
                                     std::size_t hint = std::numeric_limits<std::size_t>::max()) const;

  /// The k nearest points sorted by (distance, id); fewer if size() < k.
  std::vector<Neighbor> knn(const Eigen::Vector3d& query, std::size_t k) const;

  /// Ids of all points with distance <= radius, ascending.
  std::vector<std::size_t> radius_search(const Eigen::Vector3d& query, double radius) const;

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();  // bounding box of the node's points
    Eigen::Vector3d hi = Eigen::Vector3d::Zero();

    double box_distance2(const Eigen::Vector3d& q) const {
      return (lo - q).cwiseMax(q - hi).cwiseMax(0.0).squaredNorm();
    }
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, int leaf_size);

  template <class Accept>
  void nearest_recursive(std::uint32_t node, const Eigen::Vector3d& q, double& best_d2, std::size_t& best_id,
                         Accept& accept) const;
  void knn_recursive(std::uint32_t node, const Eigen::Vector3d& q, std::size_t k,
                     std::vector<std::pair<double, std::size_t>>& heap) const;
  void radius_recursive(std::uint32_t node, const Eigen::Vector3d& q, double r2,
                        std::vector<std::size_t>& out) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<Eigen::Vector3d> sorted_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

KdTree build_index(std::span<const Eigen::Vector3d> points);

/// Uniform-grid index stored as a dense cell array over the bounding box.
/// Same results and tie order as KdTree; much faster on near-uniform clouds
/// such as voxel centers.
class GridIndex {
 public:
  /// `cell` <= 0 picks a size from the data so that k neighbors usually lie
  /// within one cell.
  GridIndex(std::span<const Eigen::Vector3d> points, std::size_t k_hint, double cell = 0.0);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::Vector3d& point(std::size_t id) const { return points_[id]; }
  double cell() const { return cell_; }
  std::vector<KdTree::Neighbor> knn(const Eigen::Vector3d& query, std::size_t k) const;
  /// The same neighbor set written to `out`; unsorted unless `sorted`.
  void knn_into(const Eigen::Vector3d& query, std::size_t k, std::vector<KdTree::Neighbor>& out,
                bool sorted) const;

  /// Same contract as KdTree::nearest_if, including the (distance, id) tie order.
  template <class Accept>
  std::optional<KdTree::Neighbor> nearest_if(const Eigen::Vector3d& query, double max_dist, Accept&& accept,
                                             std::size_t hint = std::numeric_limits<std::size_t>::max()) const;
  std::optional<KdTree::Neighbor> nearest(const Eigen::Vector3d& query, double max_dist,
                                          std::size_t hint = std::numeric_limits<std::size_t>::max()) const {
    return nearest_if(query, max_dist, [](std::size_t) { return true; }, hint);
  }

 private:
  Eigen::Vector3i cell_of(const Eigen::Vector3d& x) const;
  /// Distance from x to the faces of cell block [lo, hi], ignoring faces on the grid edge.
  double covered_radius(const Eigen::Vector3d& x, const Eigen::Vector3i& lo, const Eigen::Vector3i& hi) const;

  std::vector<Eigen::Vector3d> points_;
  Eigen::Vector3d hi_ = Eigen::Vector3d::Zero();
  double cell_ = 1.0;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
  std::vector<std::uint32_t> cell_start_;  // size cells + 1
  std::vector<std::uint32_t> sorted_ids_;
  std::vector<Eigen::Vector3d> sorted_points_;
};

template <class Accept>
std::optional<KdTree::Neighbor> KdTree::nearest_if(const Eigen::Vector3d& query, double max_dist,
                                                   Accept&& accept, std::size_t hint) const {
  if (nodes_.empty() || !(max_dist >= 0.0)) return std::nullopt;
  double best_d2 = max_dist * max_dist;
  std::size_t best_id = std::numeric_limits<std::size_t>::max();
  if (hint < points_.size()) {
    const double d2 = (points_[hint] - query).squaredNorm();
    if (d2 <= best_d2 && accept(hint)) {
      best_d2 = d2;
      best_id = hint;
    }
  }
  if (nodes_[0].box_distance2(query) <= best_d2) nearest_recursive(0, query, best_d2, best_id, accept);
  if (best_id == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return Neighbor{best_id, std::sqrt(best_d2)};
}

template <class Accept>
void KdTree::nearest_recursive(std::uint32_t node_id, const Eigen::Vector3d& q, double& best_d2,
                               std::size_t& best_id, Accept& accept) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d2 = (sorted_[i] - q).squaredNorm();
      if (d2 > best_d2) continue;
      const std::size_t id = order_[i];
      if (d2 == best_d2 && id >= best_id) continue;
      if (!accept(id)) continue;
      best_d2 = d2;
      best_id = id;
    }
    return;
  }
  const double dl = nodes_[node.left].box_distance2(q);
  const double dr = nodes_[node.right].box_distance2(q);
  const bool left_first = dl <= dr;
  const std::uint32_t near_child = left_first ? node.left : node.right;
  const std::uint32_t far_child = left_first ? node.right : node.left;
  if ((left_first ? dl : dr) <= best_d2) nearest_recursive(near_child, q, best_d2, best_id, accept);
  if ((left_first ? dr : dl) <= best_d2) nearest_recursive(far_child, q, best_d2, best_id, accept);
}

template <class Accept>
std::optional<KdTree::Neighbor> GridIndex::nearest_if(const Eigen::Vector3d& query, double max_dist, Accept&& accept,
                                                      std::size_t hint) const {
  if (points_.empty() || !(max_dist >= 0.0)) return std::nullopt;
  double best_d2 = max_dist * max_dist;
  if ((origin_ - query).cwiseMax(query - hi_).cwiseMax(0.0).squaredNorm() > best_d2) return std::nullopt;
  std::size_t best_id = std::numeric_limits<std::size_t>::max();
  if (hint < points_.size()) {
    const double d2 = (points_[hint] - query).squaredNorm();
    if (d2 <= best_d2 && accept(hint)) {
      best_d2 = d2;
      best_id = hint;
    }
  }
  const Eigen::Vector3i home = cell_of(query);
  for (int r = 1;; ++r) {
    const Eigen::Vector3i lo = (home.array() - r).max(0).matrix();
    const Eigen::Vector3i hi = (home.array() + r).min(dims_.array() - 1).matrix();
    for (int x = lo.x(); x <= hi.x(); ++x) {
      for (int y = lo.y(); y <= hi.y(); ++y) {
        const std::size_t row = (static_cast<std::size_t>(x) * dims_.y() + y) * dims_.z();
        for (std::uint32_t s = cell_start_[row + lo.z()]; s < cell_start_[row + hi.z() + 1]; ++s) {
          const double d2 = (sorted_points_[s] - query).squaredNorm();
          if (d2 > best_d2) continue;
          const std::size_t id = sorted_ids_[s];
          if (d2 == best_d2 && id >= best_id) continue;
          if (!accept(id)) continue;
          best_d2 = d2;
          best_id = id;
        }
      }
    }
    const double covered = covered_radius(query, lo, hi);
    const bool whole = (lo.array() == 0).all() && (hi.array() == dims_.array() - 1).all();
    if (whole || covered > max_dist || best_d2 < covered * covered) break;
  }
  if (best_id == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return KdTree::Neighbor{best_id, std::sqrt(best_d2)};
}

}  // namespace occreg
