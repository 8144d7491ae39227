#include "occreg/dynamic_filter.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "occreg/spatial_index.hpp"

namespace occreg {

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;

  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<bool> membership(const std::vector<std::size_t>& ids) {
  std::vector<bool> mask(ids.empty() ? 0 : ids.back() + 1, false);
  for (auto id : ids) mask[id] = true;
  return mask;
}

}  // namespace

std::size_t DynamicVerdict::dynamic_objects() const {
  return static_cast<std::size_t>(std::count_if(objects.begin(), objects.end(), [](const auto& o) { return o.dynamic; }));
}

void DynamicFilterConfig::validate() const {
  if (!(cluster_radius > 0.0) || min_cluster_size == 0 || !(match_radius > 0.0) || !(displacement_threshold > 0.0)) {
    throw Error("DynamicFilterConfig: radii, threshold and min cluster size must be positive");
  }
}

std::vector<std::size_t> extract_movable(std::span<const Label> labels, const LabelTaxonomy& taxonomy) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (taxonomy.is_movable(labels[i])) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> extract_movable(const SemanticPointCloud& cloud, const LabelTaxonomy& taxonomy) {
  const auto labels = cloud.labels();
  return extract_movable(labels, taxonomy);
}

std::vector<ObjectCluster> cluster_points(std::span<const Eigen::Vector3d> points, std::span<const Label> labels,
                                          std::span<const std::size_t> ids, double radius,
                                          std::size_t min_cluster_size, ClusterSource source) {
  if (!(radius > 0.0)) throw Error("cluster_points: radius must be positive");
  std::vector<std::size_t> sorted_ids(ids.begin(), ids.end());
  std::sort(sorted_ids.begin(), sorted_ids.end());
  sorted_ids.erase(std::unique(sorted_ids.begin(), sorted_ids.end()), sorted_ids.end());

  std::vector<Eigen::Vector3d> subset;
  subset.reserve(sorted_ids.size());
  for (auto id : sorted_ids) subset.push_back(points[id]);
  const KdTree tree(subset);

  DisjointSets sets(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    for (auto j : tree.radius_search(subset[i], radius)) {
      if (j > i) sets.unite(i, j);
    }
  }

  // Roots are the smallest member, so iterating members in order yields
  // components ordered by smallest id.
  std::vector<std::size_t> slot(subset.size(), SIZE_MAX);
  std::vector<std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const std::size_t root = sets.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = components.size();
      components.emplace_back();
    }
    components[slot[root]].push_back(i);
  }

  std::vector<ObjectCluster> clusters;
  for (const auto& members : components) {
    if (members.size() < min_cluster_size) continue;
    ObjectCluster c;
    c.source = source;
    std::array<std::size_t, 256> counts{};
    for (auto m : members) {
      const std::size_t id = sorted_ids[m];
      c.point_ids.push_back(id);
      c.centroid += points[id];
      ++counts[labels[id]];
    }
    c.centroid /= static_cast<double>(members.size());
    c.label = static_cast<Label>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    clusters.push_back(std::move(c));
  }
  return clusters;
}

DynamicVerdict classify_dynamic(std::span<const ObjectCluster> frame_clusters,
                                std::span<const ObjectCluster> map_clusters, const Pose& coarse_pose,
                                double displacement_threshold, double match_radius) {
  DynamicVerdict verdict;
  for (std::size_t fi = 0; fi < frame_clusters.size(); ++fi) {
    const ObjectCluster& fc = frame_clusters[fi];
    const Eigen::Vector3d moved = coarse_pose * fc.centroid;
    ObjectDisplacement record;
    record.frame_cluster = fi;
    for (std::size_t mi = 0; mi < map_clusters.size(); ++mi) {
      const ObjectCluster& mc = map_clusters[mi];
      if (mc.label != fc.label) continue;
      const double d = (mc.centroid - moved).norm();
      if (d > match_radius) continue;
      const bool better = !record.map_cluster || d < record.displacement ||
                          (d == record.displacement &&
                           mc.point_ids.front() < map_clusters[*record.map_cluster].point_ids.front());
      if (better) {
        record.map_cluster = mi;
        record.displacement = d;
      }
    }
    record.dynamic = record.displacement > displacement_threshold;
    if (record.dynamic) {
      verdict.frame_dynamic.insert(verdict.frame_dynamic.end(), fc.point_ids.begin(), fc.point_ids.end());
      if (record.map_cluster) {
        const auto& ids = map_clusters[*record.map_cluster].point_ids;
        verdict.map_dynamic.insert(verdict.map_dynamic.end(), ids.begin(), ids.end());
      }
    }
    verdict.objects.push_back(record);
  }
  for (auto* set : {&verdict.frame_dynamic, &verdict.map_dynamic}) {
    std::sort(set->begin(), set->end());
    set->erase(std::unique(set->begin(), set->end()), set->end());
  }
  return verdict;
}

CorrespondencePredicate dynamic_predicate(const DynamicVerdict& verdict) {
  return [da = membership(verdict.frame_dynamic), db = membership(verdict.map_dynamic)](const Correspondence& c) {
    const bool in_da = c.source < da.size() && da[c.source];
    const bool in_db = c.target < db.size() && db[c.target];
    return !in_da && !in_db;
  };
}

SemanticPointCloud label_based_filter(const SemanticPointCloud& cloud, const LabelTaxonomy& taxonomy) {
  SemanticPointCloud out;
  out.frame_index = cloud.frame_index;
  out.taxonomy_id = cloud.taxonomy_id;
  for (const auto& p : cloud.points) {
    if (!taxonomy.is_movable(p.label)) out.points.push_back(p);
  }
  return out;
}

}  // namespace occreg
