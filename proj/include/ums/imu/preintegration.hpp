#pragma once

#include "ums/imu/types.hpp"

namespace ums {

// Relative motion terms integrated in the body frame of the first sample,
// independent of global pose and velocity:
//   alpha  position-like double integral
//   beta   velocity-like single integral
//   gamma  attitude increment
// Midpoint discretization between consecutive samples. The 15x15 covariance
// and the bias Jacobians are propagated alongside; the error-state order is
// [d_alpha, d_theta, d_beta, d_ba, d_bg].
class PreintegratedImu {
 public:
  PreintegratedImu() = default;
  PreintegratedImu(const Vec3& ba, const Vec3& bg, const ImuNoise& noise);

  void integrate(const ImuSample& from, const ImuSample& to);

  double dt() const { return dt_; }
  const Vec3& alpha() const { return alpha_; }
  const Vec3& beta() const { return beta_; }
  const Rotation& gamma() const { return gamma_; }
  const Vec3& lin_ba() const { return ba_; }
  const Vec3& lin_bg() const { return bg_; }
  const Eigen::Matrix<double, 15, 15>& covariance() const { return cov_; }

  const Mat3& d_alpha_d_ba() const { return j_alpha_ba_; }
  const Mat3& d_alpha_d_bg() const { return j_alpha_bg_; }
  const Mat3& d_beta_d_ba() const { return j_beta_ba_; }
  const Mat3& d_beta_d_bg() const { return j_beta_bg_; }
  const Mat3& d_gamma_d_bg() const { return j_gamma_bg_; }

  // First-order corrected terms around the stored linearization biases.
  Vec3 alpha_corrected(const Vec3& ba, const Vec3& bg) const;
  Vec3 beta_corrected(const Vec3& ba, const Vec3& bg) const;
  Rotation gamma_corrected(const Vec3& bg) const;

  // Copy with the linearization point moved to (new_ba, new_bg) and the terms
  // shifted first-order accordingly; Jacobians and covariance carry over.
  PreintegratedImu recentered(const Vec3& new_ba, const Vec3& new_bg) const;

 private:
  double dt_ = 0.0;
  Vec3 alpha_ = Vec3::Zero();
  Vec3 beta_ = Vec3::Zero();
  Rotation gamma_;
  Vec3 ba_ = Vec3::Zero();
  Vec3 bg_ = Vec3::Zero();
  ImuNoise noise_;
  Eigen::Matrix<double, 15, 15> cov_ = Eigen::Matrix<double, 15, 15>::Zero();
  Mat3 j_alpha_ba_ = Mat3::Zero();
  Mat3 j_alpha_bg_ = Mat3::Zero();
  Mat3 j_beta_ba_ = Mat3::Zero();
  Mat3 j_beta_bg_ = Mat3::Zero();
  Mat3 j_gamma_bg_ = Mat3::Zero();
};

// Integrates samples[0..n-1]; requires >= 2 samples with strictly increasing
// timestamps (EmptyInterval / NonMonotonicTimestamps otherwise).
PreintegratedImu preintegrate(const std::vector<ImuSample>& samples, const Vec3& ba,
                              const Vec3& bg, const ImuNoise& noise);

// Re-centers the preintegrated terms on new biases using the stored first-order
// Jacobians. Throws BiasDeltaTooLarge when the shift exceeds `max_delta`
// (default 0.1), past which the linearization is not trusted.
PreintegratedImu correct_for_bias(const PreintegratedImu& pre, const Vec3& new_ba,
                                  const Vec3& new_bg, double max_delta = 0.1);

// World-frame state propagation with the same midpoint rule.
KeyframeState propagate_state(const KeyframeState& state, const Vec3& gravity_w,
                              const std::vector<ImuSample>& samples);

}  // namespace ums
