#include "ums/backend/factors.hpp"

#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

namespace {

constexpr double kMinDepth = 1e-6;

Vec3 normalized_bearing(const Vec3& b, const char* what) {
  const double n = b.norm();
  if (!(n > 1e-9)) {
    raise(ErrorCode::StructureError, std::string(what) + " bearing has near-zero norm");
  }
  return b / n;
}

// d(P/|P|)/dP evaluated at P.
Mat3 normalize_jacobian(const Vec3& p) {
  const double norm = p.norm();
  const Vec3 n = p / norm;
  return (Mat3::Identity() - n * n.transpose()) / norm;
}

void zero_outputs(const Factor& f, const std::vector<const Eigen::VectorXd*>& params,
                  Eigen::VectorXd& residual, std::vector<Eigen::MatrixXd>* jacobians) {
  residual.setZero(f.residual_size());
  if (jacobians == nullptr) return;
  for (size_t k = 0; k < params.size(); ++k) {
    const int cols = static_cast<int>((*jacobians)[k].cols()) > 0
                         ? static_cast<int>((*jacobians)[k].cols())
                         : static_cast<int>(params[k]->size() == 4 ? 3 : params[k]->size());
    (*jacobians)[k].setZero(f.residual_size(), cols);
  }
}

}  // namespace

BearingFactor::BearingFactor(std::vector<int> block_ids, const Observation& obs,
                             const Transform& T_left_right, double weight_left,
                             double weight_right, LossKind loss)
    : Factor(3 * ((obs.target_left ? 1 : 0) + (obs.target_right ? 1 : 0)), std::move(block_ids),
             loss),
      obs_(obs),
      T_lr_(T_left_right),
      weight_left_(weight_left),
      weight_right_(weight_right) {
  if (this->block_ids().size() != 7) {
    raise(ErrorCode::StructureError, "bearing factor needs blocks q_i p_i q_j p_j q_bc p_bc lambda");
  }
  if (!obs_.target_left && !obs_.target_right) {
    raise(ErrorCode::StructureError, "bearing factor needs at least one target observation");
  }
  if (weight_left_ < 0.0 || weight_right_ < 0.0) {
    raise(ErrorCode::NegativeInput, "bearing weights must be non-negative");
  }
  obs_.anchor_bearing = normalized_bearing(obs_.anchor_bearing, "anchor");
  if (obs_.target_left) *obs_.target_left = normalized_bearing(*obs_.target_left, "target left");
  if (obs_.target_right) {
    *obs_.target_right = normalized_bearing(*obs_.target_right, "target right");
  }
}

void BearingFactor::evaluate(const std::vector<const Eigen::VectorXd*>& params,
                             Eigen::VectorXd& residual,
                             std::vector<Eigen::MatrixXd>* jacobians) const {
  const Rotation q_i = rotation_from_vector(*params[0]);
  const Vec3 p_i(*params[1]);
  const Rotation q_j = rotation_from_vector(*params[2]);
  const Vec3 p_j(*params[3]);
  const Rotation q_bc = rotation_from_vector(*params[4]);
  const Vec3 p_bc(*params[5]);
  const double lambda = (*params[6])(0);

  const Mat3 R_i = q_i.matrix();
  const Mat3 R_j = q_j.matrix();
  const Mat3 R_bc = q_bc.matrix();
  const Mat3 R_lr_t = T_lr_.r.matrix().transpose();

  const Vec3 P_ci = obs_.anchor_bearing / lambda;
  const Vec3 P_bi = R_bc * P_ci + p_bc;
  const Vec3 P_w = R_i * P_bi + p_i;
  const Vec3 u = P_w - p_j;
  const Vec3 P_bj = R_j.transpose() * u;
  const Vec3 P_cj = R_bc.transpose() * (P_bj - p_bc);
  const Vec3 P_cr = R_lr_t * (P_cj - T_lr_.t);

  const bool left_ok = !obs_.target_left || P_cj.z() > kMinDepth;
  const bool right_ok = !obs_.target_right || P_cr.z() > kMinDepth;
  if (!left_ok || !right_ok) {
    zero_outputs(*this, params, residual, jacobians);
    return;
  }

  // Point derivatives with respect to each tangent direction.
  const Mat3 B = R_bc.transpose() * R_j.transpose();
  const Mat3 d_dq_i = -B * skew(R_i * P_bi);
  const Mat3 d_dp_i = B;
  const Mat3 d_dq_j = B * skew(u);
  const Mat3 d_dp_j = -B;
  const Mat3 d_dq_bc = -B * R_i * skew(R_bc * P_ci) + R_bc.transpose() * skew(P_bj - p_bc);
  const Mat3 d_dp_bc = R_bc.transpose() * (R_j.transpose() * R_i - Mat3::Identity());
  const Vec3 d_dlambda = B * R_i * R_bc * (-obs_.anchor_bearing / (lambda * lambda));

  residual.setZero(residual_size());
  if (jacobians != nullptr) {
    for (int k = 0; k < 6; ++k) (*jacobians)[k].setZero(residual_size(), 3);
    (*jacobians)[6].setZero(residual_size(), 1);
  }

  int row = 0;
  auto emit = [&](const Vec3& point, const Vec3& observed, double weight, const Mat3& extra) {
    residual.segment<3>(row) = weight * (observed - point / point.norm());
    if (jacobians != nullptr) {
      const Mat3 N = -weight * normalize_jacobian(point);
      (*jacobians)[0].block<3, 3>(row, 0) = N * extra * d_dq_i;
      (*jacobians)[1].block<3, 3>(row, 0) = N * extra * d_dp_i;
      (*jacobians)[2].block<3, 3>(row, 0) = N * extra * d_dq_j;
      (*jacobians)[3].block<3, 3>(row, 0) = N * extra * d_dp_j;
      (*jacobians)[4].block<3, 3>(row, 0) = N * extra * d_dq_bc;
      (*jacobians)[5].block<3, 3>(row, 0) = N * extra * d_dp_bc;
      (*jacobians)[6].block<3, 1>(row, 0) = N * extra * d_dlambda;
    }
    row += 3;
  };

  if (obs_.target_left) emit(P_cj, *obs_.target_left, weight_left_, Mat3::Identity());
  if (obs_.target_right) emit(P_cr, *obs_.target_right, weight_right_, R_lr_t);
}

AnchorDepthFactor::AnchorDepthFactor(int lambda_block, const Vec3& anchor_left_bearing,
                                     const Vec3& anchor_right_bearing,
                                     const Transform& T_left_right, double weight, LossKind loss)
    : Factor(3, {lambda_block}, loss),
      bearing_left_(normalized_bearing(anchor_left_bearing, "anchor left")),
      bearing_right_(normalized_bearing(anchor_right_bearing, "anchor right")),
      T_lr_(T_left_right),
      weight_(weight) {
  if (weight_ < 0.0) {
    raise(ErrorCode::NegativeInput, "anchor depth weight must be non-negative");
  }
}

void AnchorDepthFactor::evaluate(const std::vector<const Eigen::VectorXd*>& params,
                                 Eigen::VectorXd& residual,
                                 std::vector<Eigen::MatrixXd>* jacobians) const {
  const double lambda = (*params[0])(0);
  const Mat3 R_lr_t = T_lr_.r.matrix().transpose();
  const Vec3 P_cr = R_lr_t * (bearing_left_ / lambda - T_lr_.t);
  if (P_cr.z() <= kMinDepth) {
    zero_outputs(*this, params, residual, jacobians);
    return;
  }
  residual = weight_ * (bearing_right_ - P_cr / P_cr.norm());
  if (jacobians != nullptr) {
    const Vec3 dP = R_lr_t * (-bearing_left_ / (lambda * lambda));
    (*jacobians)[0].resize(3, 1);
    (*jacobians)[0].col(0) = -weight_ * normalize_jacobian(P_cr) * dP;
  }
}

ImuFactor::ImuFactor(std::vector<int> block_ids, PreintegratedImu pre, const Vec3& gravity_w)
    : Factor(15, std::move(block_ids), LossKind::None), pre_(std::move(pre)), gravity_(gravity_w) {
  if (this->block_ids().size() != 10) {
    raise(ErrorCode::StructureError,
          "imu factor needs blocks p_i q_i v_i ba_i bg_i p_j q_j v_j ba_j bg_j");
  }
  sqrt_info_ = imu_sqrt_information(pre_);
}

void ImuFactor::evaluate(const std::vector<const Eigen::VectorXd*>& params,
                         Eigen::VectorXd& residual,
                         std::vector<Eigen::MatrixXd>* jacobians) const {
  KeyframeState si;
  si.p = Vec3(*params[0]);
  si.q = rotation_from_vector(*params[1]);
  si.v = Vec3(*params[2]);
  si.ba = Vec3(*params[3]);
  si.bg = Vec3(*params[4]);
  KeyframeState sj;
  sj.p = Vec3(*params[5]);
  sj.q = rotation_from_vector(*params[6]);
  sj.v = Vec3(*params[7]);
  sj.ba = Vec3(*params[8]);
  sj.bg = Vec3(*params[9]);

  ImuResidualJacobians jac;
  const Eigen::Matrix<double, 15, 1> raw =
      imu_residual(pre_, si, sj, gravity_, jacobians ? &jac : nullptr);
  residual = sqrt_info_ * raw;
  if (jacobians != nullptr) {
    const Eigen::Matrix<double, 15, 3>* blocks[10] = {&jac.d_p_i, &jac.d_q_i, &jac.d_v_i,
                                                      &jac.d_ba_i, &jac.d_bg_i, &jac.d_p_j,
                                                      &jac.d_q_j, &jac.d_v_j, &jac.d_ba_j,
                                                      &jac.d_bg_j};
    for (int k = 0; k < 10; ++k) (*jacobians)[k] = sqrt_info_ * (*blocks[k]);
  }
}

ExtrinsicConsistencyFactor::ExtrinsicConsistencyFactor(std::vector<int> block_ids)
    : Factor(6, std::move(block_ids), LossKind::None) {
  if (this->block_ids().size() != 6) {
    raise(ErrorCode::StructureError,
          "extrinsic consistency factor needs blocks q_b p_b q_c p_c q_bc p_bc");
  }
}

void ExtrinsicConsistencyFactor::evaluate(const std::vector<const Eigen::VectorXd*>& params,
                                          Eigen::VectorXd& residual,
                                          std::vector<Eigen::MatrixXd>* jacobians) const {
  const Rotation q_b = rotation_from_vector(*params[0]);
  const Vec3 p_b(*params[1]);
  const Rotation q_c = rotation_from_vector(*params[2]);
  const Vec3 p_c(*params[3]);
  const Rotation q_bc = rotation_from_vector(*params[4]);
  const Vec3 p_bc(*params[5]);

  const Rotation q_err = q_b.inverse() * q_c * q_bc.inverse();
  const Mat3 R_b_t = q_b.matrix().transpose();
  const Vec3 u = p_c - p_b;

  residual.resize(6);
  residual.head<3>() = 2.0 * q_err.vec();
  residual.tail<3>() = R_b_t * u - p_bc;

  if (jacobians == nullptr) return;
  for (int k = 0; k < 6; ++k) (*jacobians)[k].setZero(6, 3);

  // d(2 vec([1, e/2] * q)) / de for the quaternion error term.
  const Mat3 L = q_err.w() * Mat3::Identity() - skew(q_err.vec());
  (*jacobians)[0].topRows<3>() = -L * R_b_t;
  (*jacobians)[2].topRows<3>() = L * R_b_t;
  (*jacobians)[4].topRows<3>() = -L * q_err.matrix();

  (*jacobians)[0].bottomRows<3>() = R_b_t * skew(u);
  (*jacobians)[1].bottomRows<3>() = -R_b_t;
  (*jacobians)[3].bottomRows<3>() = R_b_t;
  (*jacobians)[5].bottomRows<3>() = -Mat3::Identity();
}

WorldPointBearingFactor::WorldPointBearingFactor(std::vector<int> block_ids,
                                                 const Vec3& world_point,
                                                 const Vec3& observed_bearing, double weight,
                                                 LossKind loss)
    : Factor(3, std::move(block_ids), loss),
      point_w_(world_point),
      bearing_(normalized_bearing(observed_bearing, "observed")),
      weight_(weight) {
  if (this->block_ids().size() != 4) {
    raise(ErrorCode::StructureError, "world point factor needs blocks q_j p_j q_bc p_bc");
  }
  if (weight_ < 0.0) {
    raise(ErrorCode::NegativeInput, "world point weight must be non-negative");
  }
}

void WorldPointBearingFactor::evaluate(const std::vector<const Eigen::VectorXd*>& params,
                                       Eigen::VectorXd& residual,
                                       std::vector<Eigen::MatrixXd>* jacobians) const {
  const Rotation q_j = rotation_from_vector(*params[0]);
  const Vec3 p_j(*params[1]);
  const Rotation q_bc = rotation_from_vector(*params[2]);
  const Vec3 p_bc(*params[3]);

  const Mat3 R_j = q_j.matrix();
  const Mat3 R_bc = q_bc.matrix();
  const Vec3 u = point_w_ - p_j;
  const Vec3 P_bj = R_j.transpose() * u;
  const Vec3 P_cj = R_bc.transpose() * (P_bj - p_bc);
  if (P_cj.z() <= kMinDepth) {
    zero_outputs(*this, params, residual, jacobians);
    return;
  }

  residual = weight_ * (bearing_ - P_cj / P_cj.norm());
  if (jacobians != nullptr) {
    const Mat3 N = -weight_ * normalize_jacobian(P_cj);
    const Mat3 B = R_bc.transpose() * R_j.transpose();
    (*jacobians)[0] = N * B * skew(u);
    (*jacobians)[1] = N * (-B);
    (*jacobians)[2] = N * R_bc.transpose() * skew(P_bj - p_bc);
    (*jacobians)[3] = N * (-R_bc.transpose());
  }
}

PriorFactor::PriorFactor(std::vector<int> block_ids, std::vector<ManifoldKind> kinds,
                         std::vector<Eigen::VectorXd> linearization_points,
                         const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& offset)
    : Factor(static_cast<int>(offset.size()), std::move(block_ids), LossKind::None),
      kinds_(std::move(kinds)),
      lin_points_(std::move(linearization_points)),
      offset_(offset) {
  if (kinds_.size() != this->block_ids().size() || lin_points_.size() != kinds_.size()) {
    raise(ErrorCode::StructureError, "prior factor block lists must have matching lengths");
  }
  int total_tangent = 0;
  for (size_t k = 0; k < kinds_.size(); ++k) {
    const int tangent = kinds_[k] == ManifoldKind::Rotation
                            ? 3
                            : static_cast<int>(lin_points_[k].size());
    if (kinds_[k] == ManifoldKind::Rotation && lin_points_[k].size() != 4) {
      raise(ErrorCode::StructureError, "rotation linearization point must hold 4 values");
    }
    total_tangent += tangent;
  }
  if (jacobian.rows() != offset_.size() || jacobian.cols() != total_tangent) {
    raise(ErrorCode::StructureError, "prior jacobian shape does not match blocks");
  }
  int col = 0;
  for (size_t k = 0; k < kinds_.size(); ++k) {
    const int tangent = kinds_[k] == ManifoldKind::Rotation
                            ? 3
                            : static_cast<int>(lin_points_[k].size());
    jac_blocks_.push_back(jacobian.middleCols(col, tangent));
    col += tangent;
  }
}

void PriorFactor::evaluate(const std::vector<const Eigen::VectorXd*>& params,
                           Eigen::VectorXd& residual,
                           std::vector<Eigen::MatrixXd>* jacobians) const {
  residual = offset_;
  for (size_t k = 0; k < kinds_.size(); ++k) {
    const Eigen::VectorXd delta = manifold_minus(kinds_[k], *params[k], lin_points_[k]);
    residual += jac_blocks_[k] * delta;
    if (jacobians != nullptr) {
      if (kinds_[k] == ManifoldKind::Rotation) {
        (*jacobians)[k] = jac_blocks_[k] * so3_left_jacobian_inverse(Vec3(delta));
      } else {
        (*jacobians)[k] = jac_blocks_[k];
      }
    }
  }
}

}  // namespace ums
