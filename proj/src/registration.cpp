#include "occreg/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "occreg/parallel.hpp"

namespace occreg {

namespace {

constexpr std::size_t kBlock = 1024;

struct PairTerms {
  double cost = 0.0;
  Twist gradient = Twist::Zero();
  Matrix6d hessian = Matrix6d::Zero();
};

}  // namespace

void GicpConfig::validate() const {
  const bool ok = max_corr_dist > 0.0 && max_iterations > 0 && translation_eps > 0.0 && rotation_eps > 0.0 &&
                  k_neighbors > 0 && epsilon_reg > 0.0 && lambda0 > 0.0 && max_retries >= 0 &&
                  min_correspondences > 0;
  if (!ok) throw Error("GicpConfig: all parameters must be positive");
}

std::vector<PointCovariance> estimate_covariances(std::span<const Eigen::Vector3d> points, int k, double epsilon_reg) {
  if (points.empty()) throw RegistrationError(RegistrationErrorKind::too_few_points, "estimate_covariances: empty cloud");
  std::vector<PointCovariance> covs(points.size(), PointCovariance::Identity());
  if (points.size() < 4) return covs;

  const auto neighbors = static_cast<std::size_t>(std::max(1, k));
  const GridIndex tree(points, neighbors);
  const Eigen::Vector3d regularized(epsilon_reg, 1.0, 1.0);
  parallel_blocks(points.size(), kBlock, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<KdTree::Neighbor> nn;
    for (std::size_t i = begin; i < end; ++i) {
      tree.knn_into(points[i], neighbors, nn, false);
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& n : nn) mean += points[n.id];
      mean /= static_cast<double>(nn.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& n : nn) {
        const Eigen::Vector3d d = points[n.id] - mean;
        cov.noalias() += d * d.transpose();
      }
      cov /= static_cast<double>(nn.size());
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
      const Eigen::Matrix3d& u = eig.eigenvectors();  // columns ordered by ascending eigenvalue
      covs[i] = u * regularized.asDiagonal() * u.transpose();
    }
  });
  return covs;
}

std::vector<PointCovariance> estimate_covariances(const SemanticPointCloud& cloud, int k, double epsilon_reg) {
  const auto pts = cloud.positions();
  return estimate_covariances(pts, k, epsilon_reg);
}

std::vector<Correspondence> find_correspondences(std::span<const Eigen::Vector3d> source, const Pose& source_pose,
                                                 const KdTree& target_index, double max_dist) {
  std::vector<Correspondence> out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (auto nn = target_index.nearest(source_pose * source[i], max_dist)) {
      out.push_back({i, nn->id, nn->distance * nn->distance});
    }
  }
  return out;
}

CorrespondencePredicate make_semantic_predicate(std::span<const Label> source_labels,
                                                std::span<const Label> target_labels) {
  return [source_labels, target_labels](const Correspondence& c) {
    return semantic_label_predicate(source_labels[c.source], target_labels[c.target]);
  };
}

CorrespondencePredicate all_of(std::vector<CorrespondencePredicate> predicates) {
  return [preds = std::move(predicates)](const Correspondence& c) {
    for (const auto& p : preds) {
      if (!p(c)) return false;
    }
    return true;
  };
}

double pair_cost(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const PointCovariance& cov_a,
                 const PointCovariance& cov_b, const Pose& transform) {
  const Eigen::Matrix3d r = transform.rotation_matrix();
  const Eigen::Vector3d d = b - transform * a;
  const Eigen::Matrix3d combined = cov_b + r * cov_a * r.transpose();
  const Eigen::Vector3d w = combined.ldlt().solve(d);
  return d.dot(w);
}

ObjectiveValue evaluate_objective(const GicpSource& source, const GicpTarget& target,
                                  std::span<const Correspondence> correspondences, const Pose& transform,
                                  bool with_derivatives) {
  const Eigen::Matrix3d r = transform.rotation_matrix();
  const std::size_t blocks = block_count(correspondences.size(), kBlock);
  std::vector<PairTerms> partial(blocks);

  parallel_blocks(correspondences.size(), kBlock, [&](std::size_t b, std::size_t begin, std::size_t end) {
    PairTerms acc;
    for (std::size_t n = begin; n < end; ++n) {
      const Correspondence& c = correspondences[n];
      const Eigen::Vector3d q = transform * source.points[c.source];
      const Eigen::Vector3d d = target.index.point(c.target) - q;
      const Eigen::Matrix3d s = r * source.covariances[c.source] * r.transpose();
      const Eigen::Matrix3d omega = (target.covariances[c.target] + s).inverse();
      const Eigen::Vector3d w = omega * d;
      acc.cost += d.dot(w);
      if (!with_derivatives) continue;

      // d(d)/d(xi) = [-I, [q]x]; the rotation also moves R C_a R^T, which adds
      // -2 (S w) x w to the rotational gradient.
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = -Eigen::Matrix3d::Identity();
      j.rightCols<3>() = skew(q);
      acc.gradient.head<3>() += -2.0 * w;
      acc.gradient.tail<3>() += -2.0 * q.cross(w) - 2.0 * (s * w).cross(w);
      acc.hessian.noalias() += 2.0 * j.transpose() * omega * j;
    }
    partial[b] = acc;
  });

  ObjectiveValue out;
  for (const auto& p : partial) {
    out.cost += p.cost;
    if (with_derivatives) {
      out.gradient += p.gradient;
      out.hessian += p.hessian;
    }
  }
  return out;
}

std::vector<Correspondence> collect_correspondences(const GicpSource& source, const GicpTarget& target,
                                                    const Pose& transform, const GicpConfig& config,
                                                    std::span<const CorrespondencePredicate> predicates,
                                                    std::vector<std::uint32_t>* hints) {
  const std::size_t n = source.points.size();
  if (hints && hints->size() != n) hints->assign(n, kNoHint);
  const std::size_t blocks = block_count(n, kBlock);
  std::vector<std::vector<Correspondence>> partial(blocks);

  parallel_blocks(n, kBlock, [&](std::size_t b, std::size_t begin, std::size_t end) {
    auto& out = partial[b];
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::Vector3d q = transform * source.points[i];
      std::optional<KdTree::Neighbor> nn;
      const std::size_t hint = hints && (*hints)[i] != kNoHint ? (*hints)[i] : std::numeric_limits<std::size_t>::max();
      if (config.search == CorrespondenceSearch::nearest_admissible && !predicates.empty()) {
        nn = target.index.nearest_if(q, config.max_corr_dist, [&](std::size_t id) {
          const Correspondence c{i, id, (target.index.point(id) - q).squaredNorm()};
          return std::all_of(predicates.begin(), predicates.end(), [&](const auto& p) { return p(c); });
        }, hint);
        if (hints) (*hints)[i] = nn ? static_cast<std::uint32_t>(nn->id) : kNoHint;
        if (nn) out.push_back({i, nn->id, nn->distance * nn->distance});
      } else {
        nn = target.index.nearest(q, config.max_corr_dist, hint);
        if (hints) (*hints)[i] = nn ? static_cast<std::uint32_t>(nn->id) : kNoHint;
        if (!nn) continue;
        const Correspondence c{i, nn->id, nn->distance * nn->distance};
        if (std::all_of(predicates.begin(), predicates.end(), [&](const auto& p) { return p(c); })) out.push_back(c);
      }
    }
  });

  std::vector<Correspondence> out;
  std::size_t total = 0;
  for (const auto& p : partial) total += p.size();
  out.reserve(total);
  for (const auto& p : partial) out.insert(out.end(), p.begin(), p.end());
  return out;
}

GicpResult gicp_align(const GicpSource& source, const GicpTarget& target, const Pose& init, const GicpConfig& config,
                      std::span<const CorrespondencePredicate> predicates) {
  config.validate();
  if (source.points.size() < 10 || target.index.size() < 10) {
    throw RegistrationError(RegistrationErrorKind::too_few_points, "gicp_align: source and target need >= 10 points");
  }
  if (source.covariances.size() != source.points.size() || target.covariances.size() != target.index.size()) {
    throw RegistrationError(RegistrationErrorKind::invalid_input, "gicp_align: covariance count mismatch");
  }

  GicpResult result;
  result.pose = init;
  double lambda = config.lambda0;
  std::vector<std::uint32_t> hints;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const auto corr = collect_correspondences(source, target, result.pose, config, predicates, &hints);
    result.correspondence_counts.push_back(corr.size());
    if (corr.size() < config.min_correspondences) {
      throw RegistrationError(RegistrationErrorKind::too_few_correspondences,
                              "gicp_align: only " + std::to_string(corr.size()) + " correspondences survived");
    }

    const ObjectiveValue current = evaluate_objective(source, target, corr, result.pose, true);
    if (!std::isfinite(current.cost) || !current.gradient.allFinite()) {
      throw RegistrationError(RegistrationErrorKind::non_finite_cost, "gicp_align: non-finite cost");
    }

    IterationStats stats;
    stats.correspondences = corr.size();
    stats.cost_before = current.cost;
    stats.cost_after = current.cost;

    Twist step = Twist::Zero();
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      const Matrix6d damped = current.hessian + lambda * Matrix6d::Identity();
      step = damped.ldlt().solve(-current.gradient);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Pose candidate = pose_exp(step) * result.pose;
      const double cost = evaluate_objective(source, target, corr, candidate, false).cost;
      if (std::isfinite(cost) && cost < current.cost) {
        result.pose = candidate;
        stats.cost_after = cost;
        stats.accepted = true;
        stats.lambda = lambda;
        lambda = std::max(config.lambda0, lambda / 10.0);
        break;
      }
      lambda *= 10.0;
    }
    result.history.push_back(stats);
    result.iterations = iter + 1;
    result.cost = stats.cost_after;

    if (!stats.accepted) {
      // No damping level lowers the cost for this association: a local minimum.
      result.converged = true;
      break;
    }
    if (step.head<3>().norm() < config.translation_eps && step.tail<3>().norm() < config.rotation_eps) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace occreg
