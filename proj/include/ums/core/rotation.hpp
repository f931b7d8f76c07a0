#pragma once

#include <Eigen/Dense>

namespace ums {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 skew(const Vec3& v);

// Unit quaternion in Hamilton convention, stored (w, x, y, z) with the scalar
// part kept non-negative so each rotation has a single representative.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  Rotation(double w, double x, double y, double z);
  explicit Rotation(const Eigen::Quaterniond& q);
  explicit Rotation(const Mat3& m);

  // Exponential map: rotation by angle |omega| about omega / |omega|.
  static Rotation exp(const Vec3& omega);
  // Minimal rotation taking direction `from` onto direction `to`.
  static Rotation from_two_vectors(const Vec3& from, const Vec3& to);
  static Rotation about_z(double yaw);

  // Log map, |result| <= pi.
  Vec3 log() const;

  Rotation inverse() const;
  Rotation operator*(const Rotation& rhs) const;
  Vec3 operator*(const Vec3& v) const;

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quat() const { return q_; }
  double w() const { return q_.w(); }
  Vec3 vec() const { return q_.vec(); }

  double angle_to(const Rotation& other) const;
  double yaw() const;

  Eigen::Vector4d wxyz() const { return {q_.w(), q_.x(), q_.y(), q_.z()}; }

 private:
  void canonicalize();
  Eigen::Quaterniond q_;  // unit, w >= 0
};

// Right Jacobian of SO(3): exp(v + d) = exp(v) * exp(Jr(v) d) + O(d^2).
Mat3 so3_right_jacobian(const Vec3& v);
// Inverse of the left Jacobian: log(exp(d) * exp(v)) = v + Jl_inv(v) d + O(d^2).
Mat3 so3_left_jacobian_inverse(const Vec3& v);

}  // namespace ums
