#include "ums/core/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ums/core/error.hpp"

namespace ums {

namespace {

// 12-parameter DLT for [R|t] from world points and bearings; the linear
// solution is projected onto SO(3). Returns false on degenerate input.
bool dlt_pose(const std::vector<Vec3>& points, const std::vector<Vec3>& bearings,
              const std::vector<int>& idx, Transform* T_c_w) {
  Eigen::MatrixXd a(3 * static_cast<int>(idx.size()), 12);
  for (size_t k = 0; k < idx.size(); ++k) {
    const Vec3& p = points[idx[k]];
    const Mat3 s = skew(bearings[idx[k]]);
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        a.block<1, 3>(3 * k + row, 3 * col) = s(row, col) * p.transpose();
      }
      a.block<1, 3>(3 * k + row, 9) = s.row(row);
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  Eigen::VectorXd h = svd.matrixV().col(11);

  Mat3 m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Vec3 t(h(9), h(10), h(11));
  // The homogeneous solution is defined up to sign; a valid pose has det > 0.
  if (m.determinant() < 0.0) {
    m = -m;
    t = -t;
  }

  const Eigen::JacobiSVD<Mat3> rsvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = rsvd.singularValues().mean();
  if (scale < 1e-12 || rsvd.singularValues()(2) < 1e-6 * rsvd.singularValues()(0)) return false;
  const double det = (rsvd.matrixU() * rsvd.matrixV().transpose()).determinant();
  const Mat3 r =
      rsvd.matrixU() * Eigen::Vector3d(1, 1, det).asDiagonal() * rsvd.matrixV().transpose();
  t /= scale;

  int positive = 0;
  for (int i : idx) {
    if (bearings[i].dot(r * points[i] + t) > 0.0) ++positive;
  }
  if (positive * 2 < static_cast<int>(idx.size())) return false;

  *T_c_w = Transform(Rotation(r), t);
  return true;
}

double bearing_angle(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

int count_inliers(const std::vector<Vec3>& points, const std::vector<Vec3>& bearings,
                  const Transform& T_c_w, double threshold, std::vector<std::uint8_t>* mask) {
  int count = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 p_c = T_c_w * points[i];
    const bool ok = p_c.norm() > 1e-9 && bearing_angle(p_c, bearings[i]) < threshold;
    if (mask) (*mask)[i] = ok ? 1 : 0;
    count += ok ? 1 : 0;
  }
  return count;
}

// Gauss-Newton on the consensus set, minimizing unit-bearing residuals over a
// local [rotation, translation] perturbation of T_c_w.
Transform refine(const std::vector<Vec3>& points, const std::vector<Vec3>& bearings,
                 const std::vector<std::uint8_t>& mask, Transform T_c_w) {
  for (int it = 0; it < 10; ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (size_t i = 0; i < points.size(); ++i) {
      if (!mask[i]) continue;
      const Vec3 p_c = T_c_w * points[i];
      const double norm = p_c.norm();
      if (norm < 1e-9) continue;
      const Vec3 n = p_c / norm;
      const Vec3 r = bearings[i] - n;
      const Mat3 d_n = (Mat3::Identity() - n * n.transpose()) / norm;
      Eigen::Matrix<double, 3, 6> d_pc;  // left perturbation on rotation, then translation
      d_pc.leftCols<3>() = -skew(p_c);
      d_pc.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 3, 6> j = -d_n * d_pc;
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> dx = (h + 1e-12 * Eigen::Matrix<double, 6, 6>::Identity()).ldlt().solve(-g);
    if (!dx.allFinite()) break;
    T_c_w = Transform(Rotation::exp(dx.head<3>()) * T_c_w.r, T_c_w.t + dx.tail<3>());
    if (dx.norm() < 1e-12) break;
  }
  return T_c_w;
}

}  // namespace

PnpResult pnp_ransac(const std::vector<Vec3>& points_w, const std::vector<Vec3>& bearings,
                     const PnpConfig& config) {
  const int n = static_cast<int>(points_w.size());
  if (n < 6 || bearings.size() != points_w.size()) {
    raise(ErrorCode::TooFewPoints, "pnp needs >= 6 correspondences, got " + std::to_string(n));
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  Transform best_pose;
  int best_count = -1;
  int max_iter = config.max_iterations;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> sample;
    while (static_cast<int>(sample.size()) < 6) {
      const int i = pick(rng);
      if (std::find(sample.begin(), sample.end(), i) == sample.end()) sample.push_back(i);
    }
    Transform T_c_w;
    if (!dlt_pose(points_w, bearings, sample, &T_c_w)) continue;
    const int count = count_inliers(points_w, bearings, T_c_w, config.angle_threshold_rad, nullptr);
    if (count > best_count) {
      best_count = count;
      best_pose = T_c_w;
      const double ratio = static_cast<double>(count) / n;
      if (ratio >= 1.0) {
        max_iter = it + 1;
      } else if (ratio > 0.0) {
        const double denom = std::log(1.0 - std::pow(ratio, 6));
        if (denom < 0.0) {
          const int needed = static_cast<int>(std::ceil(std::log(1.0 - config.confidence) / denom));
          max_iter = std::min(config.max_iterations, std::max(it + 1, needed));
        }
      }
    }
  }

  const int min_inliers = std::max(6, static_cast<int>(config.min_inlier_ratio * n));
  if (best_count < min_inliers) {
    raise(ErrorCode::NoConsensus,
          "best consensus " + std::to_string(std::max(best_count, 0)) + " of " + std::to_string(n));
  }

  std::vector<std::uint8_t> mask(n, 0);
  count_inliers(points_w, bearings, best_pose, config.angle_threshold_rad, &mask);
  const Transform refined = refine(points_w, bearings, mask, best_pose);

  PnpResult result;
  result.inliers.assign(n, 0);
  result.inlier_count =
      count_inliers(points_w, bearings, refined, config.angle_threshold_rad, &result.inliers);
  if (result.inlier_count < min_inliers) {
    raise(ErrorCode::NoConsensus, "consensus lost after refinement");
  }
  double angle_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (result.inliers[i]) angle_sum += bearing_angle(refined * points_w[i], bearings[i]);
  }
  result.mean_angle_error_rad = angle_sum / result.inlier_count;
  result.T_w_c = refined.inverse();
  return result;
}

}  // namespace ums
