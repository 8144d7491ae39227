#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "occreg/error.hpp"
#include "occreg/point_cloud.hpp"
#include "occreg/pose.hpp"
#include "occreg/spatial_index.hpp"

namespace occreg {

using PointCovariance = Eigen::Matrix3d;

struct Correspondence {
  std::size_t source = 0;  // index into the frame cloud
  std::size_t target = 0;  // index into the map points
  double squared_distance = 0.0;

  bool operator==(const Correspondence&) const = default;
};

/// Correspondence filter; a pair enters the cost only if every predicate holds.
using CorrespondencePredicate = std::function<bool(const Correspondence&)>;

/// How predicates interact with the nearest-neighbor search.
enum class CorrespondenceSearch {
  /// Take the nearest map point, then drop the pair if a predicate fails.
  nearest_then_filter,
  /// Take the nearest map point among those that satisfy every predicate.
  nearest_admissible,
};

struct GicpConfig {
  double max_corr_dist = 1.0;
  int max_iterations = 30;
  double translation_eps = 1e-4;
  double rotation_eps = 1e-4;
  int k_neighbors = 20;
  double epsilon_reg = 1e-3;
  double lambda0 = 1e-4;
  int max_retries = 5;
  std::size_t min_correspondences = 10;
  CorrespondenceSearch search = CorrespondenceSearch::nearest_admissible;

  /// Throws Error unless every numeric field is positive.
  void validate() const;
};

struct IterationStats {
  std::size_t correspondences = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;
  double lambda = 0.0;
  bool accepted = false;
};

struct GicpResult {
  Pose pose;
  double cost = 0.0;
  int iterations = 0;
  std::vector<std::size_t> correspondence_counts;
  std::vector<IterationStats> history;
  bool converged = false;
};

enum class RegistrationErrorKind { too_few_points, too_few_correspondences, non_finite_cost, invalid_input };

class RegistrationError : public Error {
 public:
  RegistrationError(RegistrationErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  RegistrationErrorKind kind() const { return kind_; }

 private:
  RegistrationErrorKind kind_;
};

/// Plane-to-plane covariances: k-nearest-neighbor sample covariance with its
/// eigenvalues replaced by (epsilon_reg, 1, 1). Clouds with fewer than 4
/// points get identity covariances. Throws RegistrationError on an empty cloud.
std::vector<PointCovariance> estimate_covariances(std::span<const Eigen::Vector3d> points, int k, double epsilon_reg);
std::vector<PointCovariance> estimate_covariances(const SemanticPointCloud& cloud, int k, double epsilon_reg);

std::vector<Correspondence> find_correspondences(std::span<const Eigen::Vector3d> source, const Pose& source_pose,
                                                 const KdTree& target_index, double max_dist);

/// Semantic Label Filter: a pair survives only when both labels agree.
inline bool semantic_label_predicate(Label a, Label b) { return a == b; }

/// Spans must outlive the returned predicate.
CorrespondencePredicate make_semantic_predicate(std::span<const Label> source_labels,
                                                std::span<const Label> target_labels);

CorrespondencePredicate all_of(std::vector<CorrespondencePredicate> predicates);

/// Mahalanobis cost d^T (C_b + R C_a R^T)^-1 d with d = b - T a.
double pair_cost(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const PointCovariance& cov_a,
                 const PointCovariance& cov_b, const Pose& transform);

struct GicpSource {
  std::span<const Eigen::Vector3d> points;
  std::span<const PointCovariance> covariances;
};

struct GicpTarget {
  const GridIndex& index;
  std::span<const PointCovariance> covariances;
};

struct ObjectiveValue {
  double cost = 0.0;
  /// Exact derivative of the summed cost w.r.t. a left twist T <- exp(xi) T at xi = 0.
  Twist gradient = Twist::Zero();
  /// Gauss-Newton approximation 2 sum J^T Omega J.
  Matrix6d hessian = Matrix6d::Zero();
};

/// Sum of pair costs over a fixed correspondence set. Summation runs in fixed
/// blocks so the value does not depend on the thread count.
ObjectiveValue evaluate_objective(const GicpSource& source, const GicpTarget& target,
                                  std::span<const Correspondence> correspondences, const Pose& transform,
                                  bool with_derivatives);

/// Correspondences at `transform` under `config.search`, with predicates applied.
/// `hints`, when given, holds one target id per source point (or kNoHint) from
/// an earlier search; it only seeds the search bound and is updated in place.
inline constexpr std::uint32_t kNoHint = std::numeric_limits<std::uint32_t>::max();
std::vector<Correspondence> collect_correspondences(const GicpSource& source, const GicpTarget& target,
                                                    const Pose& transform, const GicpConfig& config,
                                                    std::span<const CorrespondencePredicate> predicates,
                                                    std::vector<std::uint32_t>* hints = nullptr);

/// Generalized ICP by damped Gauss-Newton on a left twist. Each iteration
/// re-associates at the current pose, filters with `predicates`, and retries
/// rejected steps with ten times the damping.
GicpResult gicp_align(const GicpSource& source, const GicpTarget& target, const Pose& init, const GicpConfig& config,
                      std::span<const CorrespondencePredicate> predicates = {});

}  // namespace occreg
