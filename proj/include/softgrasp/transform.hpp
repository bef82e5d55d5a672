#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

namespace softgrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Rotation by `angle` radians about the unit vector `axis`.
inline Quat axis_angle(const Vec3& axis, double angle) {
  const double half = 0.5 * angle;
  const Vec3 v = axis * std::sin(half);
  return Quat(std::cos(half), v.x(), v.y(), v.z());
}

// SO(3) exponential of a rotation vector.
inline Quat so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    return q.normalized();
  }
  return axis_angle(w / theta, theta);
}

// Inverse of so3_exp; result has magnitude in [0, pi].
inline Vec3 so3_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(s, q.w());
  return v * (theta / s);
}

// Left Jacobian of SO(3): Exp(w + dw) ~= Exp(J_l(w) dw) Exp(w).
inline Mat3 so3_left_jacobian(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 W = skew(w);
  if (theta < 1e-6) {
    return Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * W +
         ((theta - std::sin(theta)) / (t2 * theta)) * W * W;
}

// URDF convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Quat quat_from_rpy(const Vec3& rpy) {
  return (axis_angle(Vec3::UnitZ(), rpy.z()) * axis_angle(Vec3::UnitY(), rpy.y()) *
          axis_angle(Vec3::UnitX(), rpy.x()))
      .normalized();
}

// Stable near pitch = +-pi/2: roll is recovered from the residual rotation once
// yaw and pitch are fixed, so any yaw ambiguity is absorbed exactly.
inline Vec3 rpy_from_quat(const Quat& q) {
  const Mat3 r = q.normalized().toRotationMatrix();
  const double cp = std::hypot(r(0, 0), r(1, 0));
  const double pitch = std::atan2(-r(2, 0), cp);
  const double yaw = cp > 1e-12 ? std::atan2(r(1, 0), r(0, 0)) : 0.0;
  const Mat3 rest = (axis_angle(Vec3::UnitZ(), yaw) * axis_angle(Vec3::UnitY(), pitch))
                        .toRotationMatrix()
                        .transpose() *
                    r;
  const double roll = std::atan2(rest(2, 1), rest(1, 1));
  return {roll, pitch, yaw};
}

struct RigidTransform {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  RigidTransform() = default;
  RigidTransform(const Vec3& t, const Quat& q) : translation(t), rotation(q.normalized()) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {t, Quat::Identity()}; }
  static RigidTransform from_rotation(const Quat& q) { return {Vec3::Zero(), q}; }
  static RigidTransform from_xyz_rpy(const Vec3& xyz, const Vec3& rpy) {
    return {xyz, quat_from_rpy(rpy)};
  }

  // this ∘ other: maps points of other's child frame into this's parent frame.
  RigidTransform operator*(const RigidTransform& other) const {
    return {translation + rotation * other.translation, rotation * other.rotation};
  }

  Vec3 operator*(const Vec3& p) const { return translation + rotation * p; }

  RigidTransform inverse() const {
    const Quat inv = rotation.conjugate();
    return {-(inv * translation), inv};
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Vec3 rpy() const { return rpy_from_quat(rotation); }
};

// Rotation comparison is sign-insensitive (q and -q are the same rotation).
inline bool approx_equal(const RigidTransform& a, const RigidTransform& b, double tol) {
  if ((a.translation - b.translation).cwiseAbs().maxCoeff() > tol) return false;
  const double plus = (a.rotation.coeffs() - b.rotation.coeffs()).cwiseAbs().maxCoeff();
  const double minus = (a.rotation.coeffs() + b.rotation.coeffs()).cwiseAbs().maxCoeff();
  return std::min(plus, minus) <= tol;
}

}  // namespace softgrasp
