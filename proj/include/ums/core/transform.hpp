#pragma once

#include "ums/core/rotation.hpp"

namespace ums {

// Rigid transform T^a_b: maps coordinates expressed in frame b into frame a.
// A body pose in the world is T^w_b; composing T^w_b * T^b_c chains frames.
struct Transform {
  Rotation r;
  Vec3 t = Vec3::Zero();

  Transform() = default;
  Transform(const Rotation& r_in, const Vec3& t_in) : r(r_in), t(t_in) {}

  static Transform identity() { return Transform(); }

  Vec3 operator*(const Vec3& p) const { return r * p + t; }

  Transform operator*(const Transform& rhs) const {
    return Transform(r * rhs.r, r * rhs.t + t);
  }

  Transform inverse() const {
    const Rotation ri = r.inverse();
    return Transform(ri, -(ri * t));
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = r.matrix();
    m.topRightCorner<3, 1>() = t;
    return m;
  }

  static Transform from_matrix(const Eigen::Matrix4d& m) {
    return Transform(Rotation(Mat3(m.topLeftCorner<3, 3>())), Vec3(m.topRightCorner<3, 1>()));
  }
};

// Position / angle gap between two transforms, for convergence checks.
struct PoseDelta {
  double translation = 0.0;
  double angle_rad = 0.0;
};

inline PoseDelta pose_delta(const Transform& a, const Transform& b) {
  return {(a.t - b.t).norm(), a.r.angle_to(b.r)};
}

}  // namespace ums
