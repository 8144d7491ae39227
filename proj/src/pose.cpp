#include "occreg/pose.hpp"

#include <cmath>

#include "occreg/error.hpp"

namespace occreg {

namespace {

constexpr double kSmallAngle = 1e-8;
constexpr double kDegenerateMargin = 1e-6;

Eigen::Quaterniond quaternion_from_rotation_vector(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  double w, s;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    w = 1.0 - t2 / 8.0 + t2 * t2 / 384.0;
    s = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0;
  } else {
    w = std::cos(0.5 * theta);
    s = std::sin(0.5 * theta) / theta;
  }
  Eigen::Quaterniond q(w, s * phi.x(), s * phi.y(), s * phi.z());
  q.normalize();
  return q;
}

}  // namespace

Pose::Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : rotation(q.normalized()), translation(t) {}

Pose Pose::from_translation(const Eigen::Vector3d& t) { return Pose(Eigen::Quaterniond::Identity(), t); }

Pose Pose::from_yaw(double yaw, const Eigen::Vector3d& t) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), t);
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = (rotation * rhs.rotation).normalized();
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  return out;
}

bool Pose::is_finite() const { return rotation.coeffs().allFinite() && translation.allFinite(); }

Pose pose_compose(const Pose& p, const Pose& q) { return p * q; }

Eigen::Vector3d pose_apply(const Pose& p, const Eigen::Vector3d& x) { return p * x; }

Pose pose_inverse(const Pose& p) { return p.inverse(); }

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Pose pose_exp(const Twist& twist) {
  const Eigen::Vector3d rho = twist.head<3>();
  const Eigen::Vector3d phi = twist.tail<3>();
  const double theta = phi.norm();
  const Eigen::Matrix3d phi_hat = skew(phi);

  // Left Jacobian V of SO(3); t = V rho.
  double a, b;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / (theta * theta);
    b = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + a * phi_hat + b * phi_hat * phi_hat;

  Pose out;
  out.rotation = quaternion_from_rotation_vector(phi);
  out.translation = v * rho;
  return out;
}

Twist pose_log(const Pose& pose) {
  Eigen::Quaterniond q = pose.rotation.normalized();
  if (q.w() < 0.0) q.coeffs() *= -1.0;

  const Eigen::Vector3d vec = q.vec();
  const double vnorm = vec.norm();
  const double theta = 2.0 * std::atan2(vnorm, q.w());
  if (theta > M_PI - kDegenerateMargin) {
    throw GeometryError("pose_log: rotation angle too close to pi");
  }

  Eigen::Vector3d phi;
  if (vnorm < kSmallAngle) {
    // theta / sin(theta/2) ~ 2 / w for small angles
    phi = (2.0 / q.w()) * vec;
  } else {
    phi = (theta / vnorm) * vec;
  }

  const Eigen::Matrix3d phi_hat = skew(phi);
  double c;
  if (theta < 1e-4) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    c = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  }
  const Eigen::Matrix3d v_inv = Eigen::Matrix3d::Identity() - 0.5 * phi_hat + c * phi_hat * phi_hat;

  Twist out;
  out.head<3>() = v_inv * pose.translation;
  out.tail<3>() = phi;
  return out;
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  return a.rotation.angularDistance(b.rotation);
}

}  // namespace occreg
