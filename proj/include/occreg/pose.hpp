#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace occreg {

/// Twist ordered (rho, phi): translational part first, rotation vector last.
using Twist = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid transform x -> R x + t, rotation held as a unit quaternion.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t);
  /// Rotation about +z by `yaw` radians followed by translation `t`.
  static Pose from_yaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const { return rotation * x + translation; }
  /// Applies `rhs` first, then `*this`.
  Pose operator*(const Pose& rhs) const;
  Pose inverse() const;

  bool is_finite() const;
};

Pose pose_compose(const Pose& p, const Pose& q);
Eigen::Vector3d pose_apply(const Pose& p, const Eigen::Vector3d& x);
Pose pose_inverse(const Pose& p);

Pose pose_exp(const Twist& twist);
/// Throws GeometryError when the rotation angle is within 1e-6 rad of pi.
Twist pose_log(const Pose& pose);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Angle in radians of the relative rotation between two poses.
double rotation_angle_between(const Pose& a, const Pose& b);

}  // namespace occreg
