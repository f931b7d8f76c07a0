#include "ums/imu/preintegration.hpp"

#include "ums/core/error.hpp"

namespace ums {

PreintegratedImu::PreintegratedImu(const Vec3& ba, const Vec3& bg, const ImuNoise& noise)
    : ba_(ba), bg_(bg), noise_(noise) {
  j_alpha_ba_.setZero();
  j_alpha_bg_.setZero();
  j_beta_ba_.setZero();
  j_beta_bg_.setZero();
  j_gamma_bg_.setZero();
}

void PreintegratedImu::integrate(const ImuSample& from, const ImuSample& to) {
  const double dt = to.t - from.t;
  if (dt <= 0.0) {
    raise(ErrorCode::NonMonotonicTimestamps,
          "sample dt " + std::to_string(dt) + " at t=" + std::to_string(to.t));
  }

  const Vec3 w_mid = 0.5 * (from.gyro + to.gyro) - bg_;
  const Mat3 r0 = gamma_.matrix();
  const Rotation gamma_next = gamma_ * Rotation::exp(w_mid * dt);
  const Mat3 r1 = gamma_next.matrix();

  const Vec3 a0 = from.accel - ba_;
  const Vec3 a1 = to.accel - ba_;
  const Vec3 acc_mid = 0.5 * (r0 * a0 + r1 * a1);

  // Error-state transition, order [d_alpha, d_theta, d_beta, d_ba, d_bg].
  const Mat3 i3 = Mat3::Identity();
  const Mat3 wx = skew(w_mid);
  const Mat3 a0x = skew(a0);
  const Mat3 a1x = skew(a1);
  const Mat3 theta_prop = i3 - wx * dt;
  const Mat3 dacc_dtheta = -0.5 * (r0 * a0x + r1 * a1x * theta_prop);
  const Mat3 dacc_dbg = 0.5 * r1 * a1x * dt;
  const Mat3 dacc_dba = -0.5 * (r0 + r1);

  Eigen::Matrix<double, 15, 15> f = Eigen::Matrix<double, 15, 15>::Identity();
  f.block<3, 3>(0, 3) = 0.5 * dt * dt * dacc_dtheta;
  f.block<3, 3>(0, 6) = i3 * dt;
  f.block<3, 3>(0, 9) = 0.5 * dt * dt * dacc_dba;
  f.block<3, 3>(0, 12) = 0.5 * dt * dt * dacc_dbg;
  f.block<3, 3>(3, 3) = theta_prop;
  f.block<3, 3>(3, 12) = -i3 * dt;
  f.block<3, 3>(6, 3) = dt * dacc_dtheta;
  f.block<3, 3>(6, 9) = dt * dacc_dba;
  f.block<3, 3>(6, 12) = dt * dacc_dbg;

  // Noise entry [n_a, n_w, n_ba_walk, n_bg_walk], densities scaled by 1/dt.
  Eigen::Matrix<double, 15, 12> v = Eigen::Matrix<double, 15, 12>::Zero();
  const Mat3 dacc_dnw = -0.5 * r1 * a1x * dt;
  v.block<3, 3>(0, 0) = 0.25 * (r0 + r1) * dt * dt;
  v.block<3, 3>(0, 3) = 0.5 * dt * dt * dacc_dnw;
  v.block<3, 3>(3, 3) = i3 * dt;
  v.block<3, 3>(6, 0) = 0.5 * (r0 + r1) * dt;
  v.block<3, 3>(6, 3) = dt * dacc_dnw;
  v.block<3, 3>(9, 6) = i3 * dt;
  v.block<3, 3>(12, 9) = i3 * dt;

  Eigen::Matrix<double, 12, 12> q = Eigen::Matrix<double, 12, 12>::Zero();
  const double inv_dt = 1.0 / dt;
  q.block<3, 3>(0, 0) = noise_.accel_noise * noise_.accel_noise * inv_dt * i3;
  q.block<3, 3>(3, 3) = noise_.gyro_noise * noise_.gyro_noise * inv_dt * i3;
  q.block<3, 3>(6, 6) = noise_.accel_walk * noise_.accel_walk * inv_dt * i3;
  q.block<3, 3>(9, 9) = noise_.gyro_walk * noise_.gyro_walk * inv_dt * i3;

  cov_ = f * cov_ * f.transpose() + v * q * v.transpose();

  // Propagate bias Jacobians through the same transition.
  Eigen::Matrix<double, 15, 6> j;
  j.block<3, 3>(0, 0) = j_alpha_ba_;
  j.block<3, 3>(0, 3) = j_alpha_bg_;
  j.block<3, 3>(3, 0).setZero();
  j.block<3, 3>(3, 3) = j_gamma_bg_;
  j.block<3, 3>(6, 0) = j_beta_ba_;
  j.block<3, 3>(6, 3) = j_beta_bg_;
  j.block<3, 3>(9, 0) = i3;
  j.block<3, 3>(9, 3).setZero();
  j.block<3, 3>(12, 0).setZero();
  j.block<3, 3>(12, 3) = i3;
  j = (f * j).eval();
  j_alpha_ba_ = j.block<3, 3>(0, 0);
  j_alpha_bg_ = j.block<3, 3>(0, 3);
  j_gamma_bg_ = j.block<3, 3>(3, 3);
  j_beta_ba_ = j.block<3, 3>(6, 0);
  j_beta_bg_ = j.block<3, 3>(6, 3);

  alpha_ += beta_ * dt + 0.5 * acc_mid * dt * dt;
  beta_ += acc_mid * dt;
  gamma_ = gamma_next;
  dt_ += dt;
}

Vec3 PreintegratedImu::alpha_corrected(const Vec3& ba, const Vec3& bg) const {
  return alpha_ + j_alpha_ba_ * (ba - ba_) + j_alpha_bg_ * (bg - bg_);
}

Vec3 PreintegratedImu::beta_corrected(const Vec3& ba, const Vec3& bg) const {
  return beta_ + j_beta_ba_ * (ba - ba_) + j_beta_bg_ * (bg - bg_);
}

Rotation PreintegratedImu::gamma_corrected(const Vec3& bg) const {
  return gamma_ * Rotation::exp(j_gamma_bg_ * (bg - bg_));
}

PreintegratedImu preintegrate(const std::vector<ImuSample>& samples, const Vec3& ba,
                              const Vec3& bg, const ImuNoise& noise) {
  if (samples.size() < 2) {
    raise(ErrorCode::EmptyInterval, "preintegration needs >= 2 samples, got " +
                                        std::to_string(samples.size()));
  }
  PreintegratedImu pre(ba, bg, noise);
  for (size_t i = 1; i < samples.size(); ++i) {
    pre.integrate(samples[i - 1], samples[i]);
  }
  return pre;
}

PreintegratedImu PreintegratedImu::recentered(const Vec3& new_ba, const Vec3& new_bg) const {
  PreintegratedImu out = *this;
  out.alpha_ = alpha_corrected(new_ba, new_bg);
  out.beta_ = beta_corrected(new_ba, new_bg);
  out.gamma_ = gamma_corrected(new_bg);
  out.ba_ = new_ba;
  out.bg_ = new_bg;
  return out;
}

PreintegratedImu correct_for_bias(const PreintegratedImu& pre, const Vec3& new_ba,
                                  const Vec3& new_bg, double max_delta) {
  const Vec3 dba = new_ba - pre.lin_ba();
  const Vec3 dbg = new_bg - pre.lin_bg();
  const double shift = std::max(dba.lpNorm<Eigen::Infinity>(), dbg.lpNorm<Eigen::Infinity>());
  if (shift > max_delta) {
    raise(ErrorCode::BiasDeltaTooLarge, "bias shift " + std::to_string(shift));
  }
  return pre.recentered(new_ba, new_bg);
}

KeyframeState propagate_state(const KeyframeState& state, const Vec3& gravity_w,
                              const std::vector<ImuSample>& samples) {
  KeyframeState out = state;
  if (samples.size() < 2) return out;
  for (size_t i = 1; i < samples.size(); ++i) {
    const double dt = samples[i].t - samples[i - 1].t;
    if (dt <= 0.0) {
      raise(ErrorCode::NonMonotonicTimestamps, "propagation dt " + std::to_string(dt));
    }
    const Vec3 w_mid = 0.5 * (samples[i - 1].gyro + samples[i].gyro) - out.bg;
    const Rotation q_next = out.q * Rotation::exp(w_mid * dt);
    const Vec3 a0 = out.q * (samples[i - 1].accel - out.ba) + gravity_w;
    const Vec3 a1 = q_next * (samples[i].accel - out.ba) + gravity_w;
    const Vec3 acc_mid = 0.5 * (a0 + a1);
    out.p += out.v * dt + 0.5 * acc_mid * dt * dt;
    out.v += acc_mid * dt;
    out.q = q_next;
  }
  return out;
}

}  // namespace ums
