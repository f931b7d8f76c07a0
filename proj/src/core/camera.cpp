#include "ums/core/camera.hpp"

#include <cmath>

namespace ums {

Vec2 CameraIntrinsics::distort(const Vec2& n, Eigen::Matrix2d* jacobian) const {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + k2 * r2);
  Vec2 d(x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
         y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y);
  if (jacobian) {
    const double d_radial_d_r2 = k1 + 2.0 * k2 * r2;
    const double dxx = radial + x * d_radial_d_r2 * 2.0 * x + 2.0 * p1 * y + 6.0 * p2 * x;
    const double dxy = x * d_radial_d_r2 * 2.0 * y + 2.0 * p1 * x + 2.0 * p2 * y;
    const double dyx = y * d_radial_d_r2 * 2.0 * x + 2.0 * p2 * y + 2.0 * p1 * x;
    const double dyy = radial + y * d_radial_d_r2 * 2.0 * y + 6.0 * p1 * y + 2.0 * p2 * x;
    *jacobian << dxx, dxy, dyx, dyy;
  }
  return d;
}

Vec2 CameraIntrinsics::project(const Vec3& p_c, Eigen::Matrix<double, 2, 3>* jacobian) const {
  if (p_c.z() <= 0.0) {
    raise(ErrorCode::NonPositiveDepth, "projection behind image plane, z=" + std::to_string(p_c.z()));
  }
  const double inv_z = 1.0 / p_c.z();
  const Vec2 n(p_c.x() * inv_z, p_c.y() * inv_z);
  Eigen::Matrix2d dd;
  const Vec2 d = distort(n, jacobian ? &dd : nullptr);
  if (jacobian) {
    Eigen::Matrix<double, 2, 3> dn;
    dn << inv_z, 0.0, -n.x() * inv_z, 0.0, inv_z, -n.y() * inv_z;
    Eigen::Matrix2d k;
    k << fx, 0.0, 0.0, fy;
    *jacobian = k * dd * dn;
  }
  return Vec2(fx * d.x() + cx, fy * d.y() + cy);
}

Vec3 CameraIntrinsics::unproject(const Vec2& px) const {
  const Vec2 target((px.x() - cx) / fx, (px.y() - cy) / fy);
  Vec2 n = target;  // undistorted estimate
  bool converged = false;
  for (int it = 0; it < 10; ++it) {
    Eigen::Matrix2d j;
    const Vec2 err = distort(n, &j) - target;
    if (!err.allFinite()) break;
    if (err.norm() < 1e-10) {
      converged = true;
      break;
    }
    n -= j.fullPivLu().solve(err);
  }
  if (!converged) {
    // accept a final residual at tolerance, otherwise report divergence
    const Vec2 err = n.allFinite() ? Vec2(distort(n) - target) : Vec2(1e9, 1e9);
    if (err.norm() >= 1e-10) {
      raise(ErrorCode::NonConvergence, "undistortion did not converge for pixel (" +
                                           std::to_string(px.x()) + ", " + std::to_string(px.y()) + ")");
    }
  }
  return Vec3(n.x(), n.y(), 1.0).normalized();
}

}  // namespace ums
