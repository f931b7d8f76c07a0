#include "ums/imu/residual.hpp"

namespace ums {

Eigen::Matrix<double, 15, 1> imu_residual(const PreintegratedImu& pre, const KeyframeState& si,
                                          const KeyframeState& sj, const Vec3& gravity_w,
                                          ImuResidualJacobians* jacobians) {
  const double dt = pre.dt();
  const Rotation gamma_c = pre.gamma_corrected(si.bg);
  const Vec3 alpha_c = pre.alpha_corrected(si.ba, si.bg);
  const Vec3 beta_c = pre.beta_corrected(si.ba, si.bg);

  const Rotation dq = gamma_c.inverse() * (si.q.inverse() * sj.q);
  const Mat3 ri_t = si.q.matrix().transpose();
  const Vec3 u = sj.p - si.p - si.v * dt - 0.5 * gravity_w * dt * dt;
  const Vec3 w = sj.v - si.v - gravity_w * dt;

  Eigen::Matrix<double, 15, 1> r;
  r.segment<3>(0) = 2.0 * dq.vec();
  r.segment<3>(3) = ri_t * u - alpha_c;
  r.segment<3>(6) = ri_t * w - beta_c;
  r.segment<3>(9) = sj.ba - si.ba;
  r.segment<3>(12) = sj.bg - si.bg;

  if (jacobians) {
    auto& jac = *jacobians;
    for (auto* m : {&jac.d_p_i, &jac.d_q_i, &jac.d_v_i, &jac.d_ba_i, &jac.d_bg_i, &jac.d_p_j,
                    &jac.d_q_j, &jac.d_v_j, &jac.d_ba_j, &jac.d_bg_j, &jac.d_gravity}) {
      m->setZero();
    }
    const Mat3 rj_t = sj.q.matrix().transpose();
    const double wq = dq.w();
    const Vec3 vq = dq.vec();
    const Mat3 a = wq * Mat3::Identity() + skew(vq);
    const Mat3 b = wq * Mat3::Identity() - skew(vq);
    const Vec3 gamma_shift = pre.d_gamma_d_bg() * (si.bg - pre.lin_bg());

    jac.d_q_j.block<3, 3>(0, 0) = a * rj_t;
    jac.d_q_i.block<3, 3>(0, 0) = -a * rj_t;
    jac.d_bg_i.block<3, 3>(0, 0) = -b * so3_right_jacobian(gamma_shift) * pre.d_gamma_d_bg();

    jac.d_p_i.block<3, 3>(3, 0) = -ri_t;
    jac.d_p_j.block<3, 3>(3, 0) = ri_t;
    jac.d_v_i.block<3, 3>(3, 0) = -ri_t * dt;
    jac.d_q_i.block<3, 3>(3, 0) = ri_t * skew(u);
    jac.d_ba_i.block<3, 3>(3, 0) = -pre.d_alpha_d_ba();
    jac.d_bg_i.block<3, 3>(3, 0) = -pre.d_alpha_d_bg();
    jac.d_gravity.block<3, 3>(3, 0) = -0.5 * ri_t * dt * dt;

    jac.d_v_i.block<3, 3>(6, 0) = -ri_t;
    jac.d_v_j.block<3, 3>(6, 0) = ri_t;
    jac.d_q_i.block<3, 3>(6, 0) = ri_t * skew(w);
    jac.d_ba_i.block<3, 3>(6, 0) = -pre.d_beta_d_ba();
    jac.d_bg_i.block<3, 3>(6, 0) = -pre.d_beta_d_bg();
    jac.d_gravity.block<3, 3>(6, 0) = -ri_t * dt;

    jac.d_ba_i.block<3, 3>(9, 0) = -Mat3::Identity();
    jac.d_ba_j.block<3, 3>(9, 0) = Mat3::Identity();
    jac.d_bg_i.block<3, 3>(12, 0) = -Mat3::Identity();
    jac.d_bg_j.block<3, 3>(12, 0) = Mat3::Identity();
  }
  return r;
}

Eigen::Matrix<double, 15, 15> imu_sqrt_information(const PreintegratedImu& pre) {
  // Reorder covariance [alpha, theta, beta, ba, bg] -> residual [theta, alpha, beta, ba, bg].
  Eigen::Matrix<double, 15, 15> perm = Eigen::Matrix<double, 15, 15>::Zero();
  perm.block<3, 3>(0, 3).setIdentity();
  perm.block<3, 3>(3, 0).setIdentity();
  perm.block<9, 9>(6, 6).setIdentity();
  Eigen::Matrix<double, 15, 15> cov = perm * pre.covariance() * perm.transpose();
  // Regularize relative to each variance so the wildly different scales of the
  // bias-walk and attitude entries are preserved through the inversion.
  const double floor_eps = std::max(1e-300, 1e-16 * cov.diagonal().maxCoeff());
  cov.diagonal() = cov.diagonal() * (1.0 + 1e-9);
  cov.diagonal().array() += floor_eps;
  const Eigen::Matrix<double, 15, 15> info = cov.inverse();
  const Eigen::LLT<Eigen::Matrix<double, 15, 15>> llt(
      0.5 * (info + info.transpose()).eval());
  return llt.matrixU();
}

}  // namespace ums
