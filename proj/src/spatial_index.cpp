#include "occreg/spatial_index.hpp"

#include <algorithm>
#include <cmath>

namespace occreg {

KdTree::KdTree(std::span<const Eigen::Vector3d> points, int leaf_size) : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / static_cast<std::size_t>(std::max(1, leaf_size)) + 1);
  build(0, static_cast<std::uint32_t>(order_.size()), std::max(1, leaf_size));
  sorted_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) sorted_[i] = points_[order_[i]];
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int leaf_size) {
  const auto node_id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_[node_id].begin = begin;
  nodes_[node_id].end = end;
  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  nodes_[node_id].lo = lo;
  nodes_[node_id].hi = hi;
  if (end - begin <= static_cast<std::uint32_t>(leaf_size)) return node_id;
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return node_id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];

  const std::uint32_t left = build(begin, mid, leaf_size);
  const std::uint32_t right = build(mid, end, leaf_size);
  Node& node = nodes_[node_id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return node_id;
}

std::vector<KdTree::Neighbor> KdTree::knn(const Eigen::Vector3d& query, std::size_t k) const {
  std::vector<Neighbor> out;
  if (nodes_.empty() || k == 0) return out;
  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(k + 1);
  knn_recursive(0, query, k, heap);
  out.reserve(heap.size());
  for (const auto& [d2, id] : heap) out.push_back({id, std::sqrt(d2)});
  return out;
}

void KdTree::knn_recursive(std::uint32_t node_id, const Eigen::Vector3d& q, std::size_t k,
                           std::vector<std::pair<double, std::size_t>>& best) const {
  // `best` stays sorted ascending by (d2, id); k is small so insertion is cheap.
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::pair<double, std::size_t> cand{(sorted_[i] - q).squaredNorm(), order_[i]};
      if (best.size() == k && !(cand < best.back())) continue;
      best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      if (best.size() > k) best.pop_back();
    }
    return;
  }
  const double dl = nodes_[node.left].box_distance2(q);
  const double dr = nodes_[node.right].box_distance2(q);
  const bool left_first = dl <= dr;
  knn_recursive(left_first ? node.left : node.right, q, k, best);
  const double far = left_first ? dr : dl;
  if (best.size() < k || far <= best.back().first) knn_recursive(left_first ? node.right : node.left, q, k, best);
}

std::vector<std::size_t> KdTree::radius_search(const Eigen::Vector3d& query, double radius) const {
  std::vector<std::size_t> out;
  if (nodes_.empty() || !(radius >= 0.0)) return out;
  radius_recursive(0, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree::radius_recursive(std::uint32_t node_id, const Eigen::Vector3d& q, double r2,
                              std::vector<std::size_t>& out) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      if ((sorted_[i] - q).squaredNorm() <= r2) out.push_back(order_[i]);
    }
    return;
  }
  if (nodes_[node.left].box_distance2(q) <= r2) radius_recursive(node.left, q, r2, out);
  if (nodes_[node.right].box_distance2(q) <= r2) radius_recursive(node.right, q, r2, out);
}

KdTree build_index(std::span<const Eigen::Vector3d> points) { return KdTree(points); }

}  // namespace occreg

namespace occreg {

namespace {

// Median distance to the k-th nearest neighbor over an evenly spaced sample,
// by brute force.
double sampled_kth_distance(std::span<const Eigen::Vector3d> points, std::size_t k) {
  const std::size_t n = points.size();
  const std::size_t samples = std::min<std::size_t>(n, 24);
  const std::size_t kk = std::min(k, n) - 1;
  std::vector<double> kth;
  std::vector<double> d2(n);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& q = points[s * n / samples];
    for (std::size_t i = 0; i < n; ++i) d2[i] = (points[i] - q).squaredNorm();
    std::nth_element(d2.begin(), d2.begin() + static_cast<long>(kk), d2.end());
    kth.push_back(std::sqrt(d2[kk]));
  }
  std::nth_element(kth.begin(), kth.begin() + static_cast<long>(kth.size() / 2), kth.end());
  return kth[kth.size() / 2];
}

}  // namespace

GridIndex::GridIndex(std::span<const Eigen::Vector3d> points, std::size_t k_hint, double cell)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  Eigen::Vector3d lo = points_.front(), hi = lo;
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Half the typical k-th neighbor distance: a 5-cell block then usually
  // holds all k neighbors with few extra candidates.
  if (!(cell > 0.0)) cell = 0.5 * sampled_kth_distance(points_, std::max<std::size_t>(1, k_hint));
  const double extent = (hi - lo).maxCoeff();
  cell = std::max({cell, extent * 1e-6, 1e-9});
  // Keep the dense array within a few cells per point.
  const double budget = 32.0 * static_cast<double>(points_.size()) + 1024.0;
  for (;;) {
    const Eigen::Vector3d cells = ((hi - lo) / cell).array().floor() + 1.0;
    if (cells.prod() <= budget) break;
    cell *= 1.5;
  }
  cell_ = cell;
  origin_ = lo;
  hi_ = hi;
  dims_ = (((hi - lo) / cell_).array().floor() + 1.0).cast<int>();

  const auto cells = static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z();
  std::vector<std::uint32_t> cell_id(points_.size());
  cell_start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Eigen::Vector3i c = cell_of(points_[i]);
    cell_id[i] = static_cast<std::uint32_t>((static_cast<std::size_t>(c.x()) * dims_.y() + c.y()) * dims_.z() + c.z());
    ++cell_start_[cell_id[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  sorted_ids_.resize(points_.size());
  sorted_points_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {  // ids stay ascending within a cell
    const std::uint32_t slot = fill[cell_id[i]]++;
    sorted_ids_[slot] = static_cast<std::uint32_t>(i);
    sorted_points_[slot] = points_[i];
  }
}

Eigen::Vector3i GridIndex::cell_of(const Eigen::Vector3d& x) const {
  Eigen::Vector3i c;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((x[a] - origin_[a]) / cell_);
    c[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(dims_[a] - 1)));
  }
  return c;
}

double GridIndex::covered_radius(const Eigen::Vector3d& x, const Eigen::Vector3i& lo,
                                 const Eigen::Vector3i& hi) const {
  double covered = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (lo[a] > 0) covered = std::min(covered, x[a] - (origin_[a] + lo[a] * cell_));
    if (hi[a] < dims_[a] - 1) covered = std::min(covered, origin_[a] + (hi[a] + 1) * cell_ - x[a]);
  }
  return covered;
}

std::vector<KdTree::Neighbor> GridIndex::knn(const Eigen::Vector3d& query, std::size_t k) const {
  std::vector<KdTree::Neighbor> out;
  knn_into(query, k, out, true);
  return out;
}

void GridIndex::knn_into(const Eigen::Vector3d& query, std::size_t k, std::vector<KdTree::Neighbor>& out,
                         bool sorted) const {
  out.clear();
  if (points_.empty() || k == 0) return;
  k = std::min(k, points_.size());
  // Cells are clamped at the border, so the covered ball radius is measured
  // from the query itself rather than from its cell.
  const Eigen::Vector3i home = cell_of(query);
  thread_local std::vector<std::pair<double, std::uint32_t>> cand;
  for (int r = 2;; ++r) {
    cand.clear();
    const Eigen::Vector3i lo = (home.array() - r).max(0).matrix();
    const Eigen::Vector3i hi = (home.array() + r).min(dims_.array() - 1).matrix();
    for (int x = lo.x(); x <= hi.x(); ++x) {
      for (int y = lo.y(); y <= hi.y(); ++y) {
        const std::size_t row = (static_cast<std::size_t>(x) * dims_.y() + y) * dims_.z();
        for (std::uint32_t s = cell_start_[row + lo.z()]; s < cell_start_[row + hi.z() + 1]; ++s) {
          cand.emplace_back((sorted_points_[s] - query).squaredNorm(), sorted_ids_[s]);
        }
      }
    }
    const bool whole = (lo.array() == 0).all() && (hi.array() == dims_.array() - 1).all();
    if (cand.size() >= k) {
      std::nth_element(cand.begin(), cand.begin() + static_cast<long>(k - 1), cand.end());
      const double kth = cand[k - 1].first;
      // Radius guaranteed covered: distance from the query to the faces of the
      // searched block (unbounded where the block reaches the grid edge).
      const double covered = covered_radius(query, lo, hi);
      if (whole || kth < covered * covered) {
        // nth_element orders by (d2, id), so the first k are exactly the k smallest pairs.
        if (sorted) std::sort(cand.begin(), cand.begin() + static_cast<long>(k));
        for (std::size_t i = 0; i < k; ++i) out.push_back({cand[i].second, std::sqrt(cand[i].first)});
        return;
      }
    } else if (whole) {
      std::sort(cand.begin(), cand.end());
      for (const auto& [d2, id] : cand) out.push_back({id, std::sqrt(d2)});
      return;
    }
  }
}

}  // namespace occreg
