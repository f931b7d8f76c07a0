#include "ums/core/triangulate.hpp"

#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

Triangulation triangulate(const Transform& T_w_a, const Transform& T_w_b, const Vec3& bearing_a,
                          const Vec3& bearing_b, double min_parallax_deg) {
  const Vec3 dir_a = T_w_a.r * bearing_a;
  const Vec3 dir_b = T_w_b.r * bearing_b;
  const double cos_angle = std::clamp(dir_a.normalized().dot(dir_b.normalized()), -1.0, 1.0);
  const double parallax_deg = std::acos(cos_angle) * 180.0 / M_PI;
  if (parallax_deg < min_parallax_deg) {
    raise(ErrorCode::LowParallax, "parallax " + std::to_string(parallax_deg) + " deg");
  }

  // Rows of bearing x (R_cw p + t_cw) = 0 for both views, homogeneous point.
  const Transform T_a_w = T_w_a.inverse();
  const Transform T_b_w = T_w_b.inverse();
  Eigen::Matrix<double, 6, 4> a;
  auto fill = [&a](int row, const Transform& T_c_w, const Vec3& bearing) {
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = T_c_w.r.matrix();
    p.rightCols<1>() = T_c_w.t;
    a.block<3, 4>(row, 0) = skew(bearing) * p;
  };
  fill(0, T_a_w, bearing_a);
  fill(3, T_b_w, bearing_b);

  const Eigen::JacobiSVD<Eigen::Matrix<double, 6, 4>> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h.w()) < 1e-12) {
    raise(ErrorCode::LowParallax, "triangulated point at infinity");
  }
  const Vec3 p_w = h.head<3>() / h.w();

  const double depth_a = bearing_a.dot(T_a_w * p_w);
  const double depth_b = bearing_b.dot(T_b_w * p_w);
  if (depth_a <= 0.0 || depth_b <= 0.0) {
    raise(ErrorCode::BehindCamera, "depths " + std::to_string(depth_a) + ", " + std::to_string(depth_b));
  }
  return {p_w, parallax_deg};
}

double stereo_depth(const Transform& T_left_right, const Vec3& bearing_left,
                    const Vec3& bearing_right, double min_parallax_deg) {
  // p_left = d_l * b_l = R_lr * (d_r * b_r) + t_lr; solve [b_l, -R_lr b_r] d = t_lr.
  const Vec3 dir_right = T_left_right.r * bearing_right;
  const double cos_angle = std::clamp(bearing_left.normalized().dot(dir_right.normalized()), -1.0, 1.0);
  if (std::acos(cos_angle) * 180.0 / M_PI < min_parallax_deg) {
    raise(ErrorCode::LowParallax, "stereo rays near parallel");
  }
  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = bearing_left;
  a.col(1) = -dir_right;
  const Vec2 depths = a.colPivHouseholderQr().solve(T_left_right.t);
  if (depths.x() <= 0.0 || depths.y() <= 0.0) {
    raise(ErrorCode::BehindCamera, "stereo depths " + std::to_string(depths.x()) + ", " +
                                       std::to_string(depths.y()));
  }
  return depths.x();
}

}  // namespace ums
