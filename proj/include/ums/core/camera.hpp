#pragma once

#include "ums/core/error.hpp"
#include "ums/core/rotation.hpp"

namespace ums {

// Pinhole camera with radial-tangential distortion (k1, k2, p1, p2).
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  double k1 = 0.0, k2 = 0.0, p1 = 0.0, p2 = 0.0;
  int width = 0, height = 0;

  bool in_bounds(const Vec2& px, double margin = 0.0) const {
    return px.x() >= margin && px.y() >= margin && px.x() <= width - 1.0 - margin &&
           px.y() <= height - 1.0 - margin;
  }

  // Applies distortion to normalized image coordinates, optionally returning
  // d(distorted)/d(normalized).
  Vec2 distort(const Vec2& n, Eigen::Matrix2d* jacobian = nullptr) const;

  // Camera point -> pixel. Throws NonPositiveDepth for z <= 0. `jacobian` is
  // d(pixel)/d(point), 2x3.
  Vec2 project(const Vec3& p_c, Eigen::Matrix<double, 2, 3>* jacobian = nullptr) const;

  // Pixel -> unit bearing. Newton iteration on the distortion model; throws
  // NonConvergence when 10 iterations do not reach 1e-10 in normalized coords.
  Vec3 unproject(const Vec2& px) const;
};

}  // namespace ums
