#include "occreg/voxel_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace occreg {

namespace {

int floor_div2(int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

Label weighted_majority(const std::vector<std::pair<Label, double>>& weights) {
  Label best = 0;
  double best_w = -1.0;
  for (const auto& [label, w] : weights) {
    if (w > best_w || (w == best_w && label < best)) {
      best = label;
      best_w = w;
    }
  }
  return best;
}

template <class W>
void add_weight(std::vector<std::pair<Label, W>>& weights, Label label, W w) {
  for (auto& [l, acc] : weights) {
    if (l == label) {
      acc += w;
      return;
    }
  }
  weights.emplace_back(label, w);
}

}  // namespace

double p_index(const MapVoxel& voxel, std::uint32_t t) {
  if (t < voxel.t0) throw Error("p_index: t precedes the voxel's first observation");
  return static_cast<double>(voxel.f) / (static_cast<double>(t - voxel.t0) + 1.0);
}

GlobalMap::GlobalMap(double voxel_size, const Eigen::Vector3d& anchor) : voxel_size_(voxel_size), anchor_(anchor) {
  if (!(voxel_size > 0.0) || !anchor.allFinite()) throw GeometryError("GlobalMap: voxel size must be positive");
}

const MapVoxel* GlobalMap::find(const VoxelKey& key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : &voxels_[it->second];
}

VoxelKey GlobalMap::key_of(const Eigen::Vector3d& x) const {
  VoxelKey key;
  for (int a = 0; a < 3; ++a) {
    const double q = (x[a] - anchor_[a]) / voxel_size_;
    const double r = std::round(q);
    key[a] = static_cast<int>(std::abs(q - r) < 1e-9 ? r : std::floor(q));
  }
  return key;
}

Eigen::Vector3d GlobalMap::key_center(const VoxelKey& key) const {
  return anchor_ + (key.cast<double>().array() + 0.5).matrix() * voxel_size_;
}

MergeReport GlobalMap::merge_frame(const SemanticPointCloud& cloud, const Pose& pose, std::uint32_t t,
                                   std::span<const PointCovariance> covariances) {
  if (has_frames_ && t < t_) throw Error("merge_frame: frame index moves backwards");
  if (!covariances.empty() && covariances.size() != cloud.size()) {
    throw Error("merge_frame: covariance count does not match the cloud");
  }

  struct Group {
    VoxelKey key;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
    std::size_t first_point = 0;
    std::vector<std::pair<Label, std::uint32_t>> labels;
  };
  std::vector<Group> groups;
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash, VoxelKeyEqual> local;
  local.reserve(cloud.size());
  groups.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d w = pose * cloud.points[i].position;
    const VoxelKey key = key_of(w);
    auto [it, inserted] = local.try_emplace(key, groups.size());
    if (inserted) {
      groups.push_back({key, Eigen::Vector3d::Zero(), 0, i, {}});
    }
    Group& g = groups[it->second];
    g.sum += w;
    ++g.count;
    add_weight<std::uint32_t>(g.labels, cloud.points[i].label, 1u);
  }

  const Eigen::Matrix3d r = pose.rotation_matrix();
  MergeReport report;
  index_.reserve(voxels_.size() + groups.size());
  for (const Group& g : groups) {
    const Eigen::Vector3d mean = g.sum / static_cast<double>(g.count);
    Label label = g.labels.front().first;
    std::uint32_t best = 0;
    for (const auto& [l, c] : g.labels) {
      if (c > best || (c == best && l < label)) {
        label = l;
        best = c;
      }
    }
    const PointCovariance cov =
        covariances.empty() ? PointCovariance::Identity() : PointCovariance(r * covariances[g.first_point] * r.transpose());

    auto [it, inserted] = index_.try_emplace(g.key, voxels_.size());
    if (inserted) {
      MapVoxel v;
      v.key = g.key;
      v.position = mean;
      v.label = label;
      v.t0 = t;
      v.f = 1;
      v.covariance = cov;
      v.label_counts.emplace_back(label, 1u);
      voxels_.push_back(std::move(v));
      ++report.created;
      continue;
    }
    MapVoxel& v = voxels_[it->second];
    ++v.f;
    v.position += (mean - v.position) / static_cast<double>(v.f);
    if (!covariances.empty()) v.covariance = cov;
    add_weight<std::uint32_t>(v.label_counts, label, 1u);
    std::uint32_t incumbent = 0;
    for (const auto& [l, c] : v.label_counts) {
      if (l == v.label) incumbent = c;
    }
    Label winner = v.label;
    std::uint32_t winner_count = incumbent;
    for (const auto& [l, c] : v.label_counts) {
      if (c > winner_count || (c == winner_count && c > incumbent && l < winner)) {
        winner = l;
        winner_count = c;
      }
    }
    if (winner != v.label) {
      v.label = winner;
      ++report.relabeled;
    }
    ++report.updated;
  }
  t_ = t;
  has_frames_ = true;
  return report;
}

void GlobalMap::downsample_persistent(std::uint32_t t, double threshold) {
  struct Cell {
    VoxelKey coarse;
    Eigen::Vector3d weighted = Eigen::Vector3d::Zero();
    double weight = 0.0;
    std::vector<std::pair<Label, double>> labels;
    std::uint32_t t0 = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t f = 0;
    double best_p = -1.0;
    PointCovariance covariance = PointCovariance::Identity();
  };
  std::vector<Cell> cells;
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash, VoxelKeyEqual> lookup;
  for (const MapVoxel& v : voxels_) {
    const double p = p_index(v, t);
    if (!(p > threshold)) continue;
    const VoxelKey coarse(floor_div2(v.key.x()), floor_div2(v.key.y()), floor_div2(v.key.z()));
    auto [it, inserted] = lookup.try_emplace(coarse, cells.size());
    if (inserted) {
      cells.emplace_back();
      cells.back().coarse = coarse;
    }
    Cell& c = cells[it->second];
    c.weighted += p * v.position;
    c.weight += p;
    add_weight<double>(c.labels, v.label, p);
    c.t0 = std::min(c.t0, v.t0);
    c.f = std::max(c.f, v.f);
    if (p > c.best_p) {
      c.best_p = p;
      c.covariance = v.covariance;
    }
  }

  std::vector<MapVoxel> merged;
  merged.reserve(cells.size());
  for (const Cell& c : cells) {
    MapVoxel v;
    v.position = c.weighted / c.weight;
    const VoxelKey lo = 2 * c.coarse;
    v.key = key_of(v.position).cwiseMax(lo).cwiseMin(lo + VoxelKey::Ones());
    v.label = weighted_majority(c.labels);
    v.t0 = c.t0;
    v.f = c.f;
    v.covariance = c.covariance;
    v.label_counts.emplace_back(v.label, v.f);
    merged.push_back(std::move(v));
  }
  voxels_ = std::move(merged);
  rebuild_index();
}

GlobalMap GlobalMap::from_voxels(double voxel_size, const Eigen::Vector3d& anchor, std::uint32_t t, bool has_frames,
                                 std::vector<MapVoxel> voxels) {
  GlobalMap map(voxel_size, anchor);
  map.t_ = t;
  map.has_frames_ = has_frames;
  map.voxels_ = std::move(voxels);
  map.rebuild_index();
  if (map.index_.size() != map.voxels_.size()) throw Error("GlobalMap: duplicate voxel keys");
  return map;
}

void GlobalMap::rebuild_index() {
  index_.clear();
  index_.reserve(voxels_.size());
  for (std::size_t i = 0; i < voxels_.size(); ++i) index_.emplace(voxels_[i].key, i);
}

std::function<bool(const Eigen::Vector3d&)> persistence_predicate(const GlobalMap& map, std::uint32_t t,
                                                                  double threshold) {
  return [&map, t, threshold](const Eigen::Vector3d& x) {
    const MapVoxel* v = map.find(map.key_of(x));
    return v != nullptr && t >= v->t0 && p_index(*v, t) > threshold;
  };
}

CorrespondencePredicate persistence_predicate(const GlobalMap& map, std::uint32_t t, double threshold,
                                              std::span<const Eigen::Vector3d> target_points) {
  std::vector<bool> accepted(target_points.size());
  const auto on_point = persistence_predicate(map, t, threshold);
  for (std::size_t i = 0; i < target_points.size(); ++i) accepted[i] = on_point(target_points[i]);
  return [accepted = std::move(accepted)](const Correspondence& c) {
    return c.target < accepted.size() && accepted[c.target];
  };
}

namespace {

void append(MapSnapshot& out, const MapVoxel& v, std::size_t slot) {
  out.points.push_back(v.position);
  out.labels.push_back(v.label);
  out.covariances.push_back(v.covariance);
  out.slots.push_back(slot);
}

}  // namespace

MapSnapshot extract_persistent(const GlobalMap& map, std::uint32_t t, double threshold) {
  MapSnapshot out;
  const auto& voxels = map.voxels();
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    if (p_index(voxels[i], t) > threshold) append(out, voxels[i], i);
  }
  return out;
}

MapSnapshot all_voxels(const GlobalMap& map) {
  MapSnapshot out;
  const auto& voxels = map.voxels();
  out.points.reserve(voxels.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) append(out, voxels[i], i);
  return out;
}

MapSnapshot local_crop(const MapSnapshot& snapshot, const Eigen::Vector3d& center, double radius) {
  if (!(radius > 0.0)) throw Error("local_crop: radius must be positive");
  MapSnapshot out;
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    if (((snapshot.points[i] - center).cwiseAbs().array() <= radius).all()) {
      out.points.push_back(snapshot.points[i]);
      out.labels.push_back(snapshot.labels[i]);
      out.covariances.push_back(snapshot.covariances[i]);
      out.slots.push_back(snapshot.slots[i]);
    }
  }
  return out;
}

SemanticPointCloud to_cloud(const MapSnapshot& snapshot, std::uint32_t frame_index) {
  SemanticPointCloud cloud;
  cloud.frame_index = frame_index;
  cloud.points.reserve(snapshot.size());
  for (std::size_t i = 0; i < snapshot.size(); ++i) cloud.points.push_back({snapshot.points[i], snapshot.labels[i]});
  return cloud;
}

std::pair<SemanticPointCloud, VoxelGridSpec> export_map(const GlobalMap& map) {
  VoxelGridSpec spec;
  spec.voxel_size = map.voxel_size();
  SemanticPointCloud cloud;
  cloud.frame_index = map.t();
  if (map.empty()) {
    spec.min_bound = map.anchor();
    spec.dims = Eigen::Vector3i::Ones();
    return {cloud, spec};
  }
  VoxelKey lo = map.voxels().front().key;
  VoxelKey hi = lo;
  for (const auto& v : map.voxels()) {
    lo = lo.cwiseMin(v.key);
    hi = hi.cwiseMax(v.key);
  }
  const Eigen::Vector3i dims = hi - lo + Eigen::Vector3i::Ones();
  if (dims.maxCoeff() > 65535) throw Error("export_map: map extent exceeds the frame format");
  spec.min_bound = map.anchor() + lo.cast<double>() * map.voxel_size();
  spec.dims = dims;
  cloud.points.reserve(map.size());
  for (const auto& v : map.voxels()) cloud.points.push_back({map.key_center(v.key), v.label});
  return {cloud, spec};
}

}  // namespace occreg
