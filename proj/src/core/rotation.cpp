#include "ums/core/rotation.hpp"

#include <cmath>

namespace ums {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Rotation::Rotation(double w, double x, double y, double z) : q_(w, x, y, z) {
  q_.normalize();
  canonicalize();
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) { canonicalize(); }

Rotation::Rotation(const Mat3& m) : q_(m) {
  q_.normalize();
  canonicalize();
}

void Rotation::canonicalize() {
  if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
}

Rotation Rotation::exp(const Vec3& omega) {
  const double angle = omega.norm();
  double half_c = std::cos(0.5 * angle);
  double k;  // sin(angle/2) / angle
  if (angle < 1e-8) {
    k = 0.5 - angle * angle / 48.0;
  } else {
    k = std::sin(0.5 * angle) / angle;
  }
  return Rotation(Eigen::Quaterniond(half_c, k * omega.x(), k * omega.y(), k * omega.z()));
}

Rotation Rotation::from_two_vectors(const Vec3& from, const Vec3& to) {
  return Rotation(Eigen::Quaterniond::FromTwoVectors(from, to));
}

Rotation Rotation::about_z(double yaw) { return Rotation::exp(Vec3(0.0, 0.0, yaw)); }

Vec3 Rotation::log() const {
  const Vec3 v = q_.vec();
  const double sin_half = v.norm();
  if (sin_half < 1e-12) return 2.0 * v;  // w ~ 1 after canonicalization
  const double angle = 2.0 * std::atan2(sin_half, q_.w());
  return (angle / sin_half) * v;
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

Vec3 Rotation::operator*(const Vec3& v) const { return q_ * v; }

double Rotation::angle_to(const Rotation& other) const {
  return (inverse() * other).log().norm();
}

double Rotation::yaw() const {
  const Mat3 m = matrix();
  return std::atan2(m(1, 0), m(0, 0));
}

Mat3 so3_right_jacobian(const Vec3& v) {
  const double angle = v.norm();
  const Mat3 s = skew(v);
  if (angle < 1e-6) {
    return Mat3::Identity() - 0.5 * s + s * s / 6.0;
  }
  const double a2 = angle * angle;
  const double c1 = (1.0 - std::cos(angle)) / a2;
  const double c2 = (angle - std::sin(angle)) / (a2 * angle);
  return Mat3::Identity() - c1 * s + c2 * s * s;
}

Mat3 so3_left_jacobian_inverse(const Vec3& v) {
  const double angle = v.norm();
  const Mat3 s = skew(v);
  if (angle < 1e-6) {
    return Mat3::Identity() - 0.5 * s + s * s / 12.0;
  }
  const double half = 0.5 * angle;
  const double cot_term = (1.0 - half * std::cos(half) / std::sin(half)) / (angle * angle);
  return Mat3::Identity() - 0.5 * s + cot_term * s * s;
}

}  // namespace ums
