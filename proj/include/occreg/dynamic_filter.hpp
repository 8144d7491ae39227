#pragma once

#include <Eigen/Core>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "occreg/point_cloud.hpp"
#include "occreg/pose.hpp"
#include "occreg/registration.hpp"
#include "occreg/taxonomy.hpp"

namespace occreg {

enum class ClusterSource { frame, map };

struct ObjectCluster {
  std::vector<std::size_t> point_ids;  // ascending
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Label label = 0;  // most frequent member label, ties to the lower id
  ClusterSource source = ClusterSource::frame;
};

struct ObjectDisplacement {
  std::size_t frame_cluster = 0;
  std::optional<std::size_t> map_cluster;
  /// +inf when no same-label map cluster lies within the match radius.
  double displacement = std::numeric_limits<double>::infinity();
  bool dynamic = false;
};

struct DynamicVerdict {
  std::vector<std::size_t> frame_dynamic;  // DA, ascending
  std::vector<std::size_t> map_dynamic;    // DB, ascending
  std::vector<ObjectDisplacement> objects;

  std::size_t dynamic_objects() const;
};

struct DynamicFilterConfig {
  double cluster_radius = 0.9;
  std::size_t min_cluster_size = 5;
  double match_radius = 4.0;
  double displacement_threshold = 2.0;

  void validate() const;
};

std::vector<std::size_t> extract_movable(const SemanticPointCloud& cloud, const LabelTaxonomy& taxonomy);
std::vector<std::size_t> extract_movable(std::span<const Label> labels, const LabelTaxonomy& taxonomy);

/// Single-linkage components over `ids` (indices into points/labels): two
/// points connect iff their distance is <= radius. Components smaller than
/// min_cluster_size are dropped; the rest are ordered by smallest member id.
std::vector<ObjectCluster> cluster_points(std::span<const Eigen::Vector3d> points, std::span<const Label> labels,
                                          std::span<const std::size_t> ids, double radius,
                                          std::size_t min_cluster_size, ClusterSource source = ClusterSource::frame);

/// Matches each frame cluster, moved by coarse_pose, to the nearest map
/// cluster with the same label inside match_radius. Equal distances go to the
/// map cluster with the smaller first point id. A frame cluster is dynamic when
/// its displacement exceeds the threshold; an unmatched one has infinite
/// displacement, so it is dynamic for every finite threshold.
DynamicVerdict classify_dynamic(std::span<const ObjectCluster> frame_clusters,
                                std::span<const ObjectCluster> map_clusters, const Pose& coarse_pose,
                                double displacement_threshold, double match_radius);

/// True iff the source point is not in DA and the target point is not in DB.
CorrespondencePredicate dynamic_predicate(const DynamicVerdict& verdict);

/// Drops every movable-label point.
SemanticPointCloud label_based_filter(const SemanticPointCloud& cloud, const LabelTaxonomy& taxonomy);

}  // namespace occreg
