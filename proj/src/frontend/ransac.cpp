#include "ums/frontend/ransac.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "ums/core/error.hpp"

namespace ums {

namespace {

// Eight-point estimate on normalized image coordinates, rank-2 enforced.
Mat3 fit_essential(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                   const std::vector<int>& idx) {
  Eigen::MatrixXd a(idx.size(), 9);
  for (size_t r = 0; r < idx.size(); ++r) {
    const Vec2& p = x1[idx[r]];
    const Vec2& q = x2[idx[r]];
    a.row(r) << q.x() * p.x(), q.x() * p.y(), q.x(),  //
        q.y() * p.x(), q.y() * p.y(), q.y(),          //
        p.x(), p.y(), 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Mat3 E;
  E << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  Eigen::JacobiSVD<Mat3> svd_e(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svd_e.singularValues();
  const double mean = 0.5 * (s(0) + s(1));
  return svd_e.matrixU() * Eigen::DiagonalMatrix<double, 3>(mean, mean, 0.0) *
         svd_e.matrixV().transpose();
}

double sampson_px(const Mat3& E, const Vec2& p1, const Vec2& p2, double focal) {
  const Vec3 x1(p1.x(), p1.y(), 1.0);
  const Vec3 x2(p2.x(), p2.y(), 1.0);
  const Vec3 ex1 = E * x1;
  const Vec3 etx2 = E.transpose() * x2;
  const double err = x2.dot(ex1);
  const double denom =
      ex1.x() * ex1.x() + ex1.y() * ex1.y() + etx2.x() * etx2.x() + etx2.y() * etx2.y();
  if (denom < 1e-15) return std::numeric_limits<double>::max();
  return focal * std::abs(err) / std::sqrt(denom);
}

}  // namespace

std::vector<std::uint8_t> epipolar_ransac(const std::vector<Vec3>& prev_bearings,
                                          const std::vector<Vec3>& curr_bearings,
                                          const RansacOptions& opt) {
  const size_t n = prev_bearings.size();
  if (curr_bearings.size() != n) {
    raise(ErrorCode::StructureError, "bearing lists differ in length");
  }
  if (n < 8) raise(ErrorCode::TooFewPairs, "epipolar consensus needs at least 8 pairs");

  std::vector<Vec2> x1(n), x2(n);
  std::vector<double> flow(n);
  for (size_t i = 0; i < n; ++i) {
    if (prev_bearings[i].z() < 1e-9 || curr_bearings[i].z() < 1e-9) {
      raise(ErrorCode::StructureError, "bearings must point forward");
    }
    x1[i] = prev_bearings[i].head<2>() / prev_bearings[i].z();
    x2[i] = curr_bearings[i].head<2>() / curr_bearings[i].z();
    flow[i] = opt.focal_px * (x2[i] - x1[i]).norm();
  }

  // Degenerate translation: accept everything rather than fit noise.
  std::vector<double> sorted_flow = flow;
  std::nth_element(sorted_flow.begin(), sorted_flow.begin() + n / 2, sorted_flow.end());
  if (sorted_flow[n / 2] < opt.small_motion_px) {
    return std::vector<std::uint8_t>(n, 1);
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);

  std::vector<int> sample(8);
  std::vector<std::uint8_t> best_mask(n, 1);
  size_t best_count = 0;
  int needed = opt.max_iterations;
  for (int iter = 0; iter < needed && iter < opt.max_iterations; ++iter) {
    for (int k = 0; k < 8; ++k) {
      bool fresh = true;
      do {
        sample[k] = static_cast<int>(pick(rng));
        fresh = true;
        for (int j = 0; j < k; ++j) fresh &= sample[j] != sample[k];
      } while (!fresh);
    }
    const Mat3 E = fit_essential(x1, x2, sample);
    std::vector<std::uint8_t> mask(n, 0);
    size_t count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (sampson_px(E, x1[i], x2[i], opt.focal_px) < opt.threshold_px) {
        mask[i] = 1;
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_mask = std::move(mask);
      const double inlier_ratio = static_cast<double>(count) / static_cast<double>(n);
      const double p_all = std::pow(inlier_ratio, 8.0);
      if (p_all > 1e-12) {
        needed = std::min<double>(opt.max_iterations,
                                  std::ceil(std::log(1.0 - opt.confidence) /
                                            std::log(1.0 - p_all)));
      }
    }
  }

  if (best_count >= 8) {
    // One refit over the consensus set tightens the mask.
    std::vector<int> inliers;
    for (size_t i = 0; i < n; ++i) {
      if (best_mask[i]) inliers.push_back(static_cast<int>(i));
    }
    const Mat3 E = fit_essential(x1, x2, inliers);
    for (size_t i = 0; i < n; ++i) {
      best_mask[i] = sampson_px(E, x1[i], x2[i], opt.focal_px) < opt.threshold_px ? 1 : 0;
    }
  }
  return best_mask;
}

}  // namespace ums
