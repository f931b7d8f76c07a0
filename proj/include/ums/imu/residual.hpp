#pragma once

#include "ums/imu/preintegration.hpp"

namespace ums {

// Jacobians of the 15-dim preintegration residual with respect to the tangent
// of each state block. Rotation blocks use the left perturbation
// q <- exp(delta) * q; all matrices are 15x3.
struct ImuResidualJacobians {
  Eigen::Matrix<double, 15, 3> d_p_i, d_q_i, d_v_i, d_ba_i, d_bg_i;
  Eigen::Matrix<double, 15, 3> d_p_j, d_q_j, d_v_j, d_ba_j, d_bg_j;
  Eigen::Matrix<double, 15, 3> d_gravity;
};

// Residual between consecutive states i -> j against the preintegrated terms,
// ordered [e_R, e_p, e_v, e_ba, e_bg]. Unweighted; callers whiten with the
// preintegration covariance. Zero for states produced by noiseless propagation
// of the same samples.
Eigen::Matrix<double, 15, 1> imu_residual(const PreintegratedImu& pre, const KeyframeState& si,
                                          const KeyframeState& sj, const Vec3& gravity_w,
                                          ImuResidualJacobians* jacobians = nullptr);

// Square root information factor (upper triangular) for whitening the
// residual, derived from the preintegration covariance reordered to match the
// residual layout. Bias rows use the random-walk information.
Eigen::Matrix<double, 15, 15> imu_sqrt_information(const PreintegratedImu& pre);

}  // namespace ums
