#pragma once

#include <optional>

#include "ums/core/transform.hpp"
#include "ums/imu/residual.hpp"
#include "ums/solve/problem.hpp"

namespace ums {

// Residual terms of the sliding-window estimator. All rotation blocks are
// unit quaternions (w, x, y, z) with the left perturbation q <- exp(d) * q;
// landmark blocks hold one positive inverse depth. Visual terms compare unit
// bearings, so pixel measurements are converted with unproject() up front.

// Reprojection of an inverse-depth landmark, anchored at its first observing
// keyframe's left camera, into another keyframe's left and/or right camera.
// Blocks: [q_i, p_i, q_j, p_j, q_bc, p_bc, lambda] where i is the anchor body
// pose, j the target body pose, and (q_bc, p_bc) the body-to-left-camera
// extrinsic shared by both frames. The right camera hangs off the left one
// through the fixed calibrated baseline. Each active term contributes three
// rows weighted by its own factor (the stereo weight for depth-resolved
// features, the smaller monocular weight for 2D-only tracks). A predicted
// depth at or below zero deactivates the factor for that evaluation: residual
// and Jacobians are zeroed rather than throwing mid-solve.
class BearingFactor : public Factor {
 public:
  struct Observation {
    Vec3 anchor_bearing = Vec3::UnitZ();    // unit bearing, anchor left camera
    std::optional<Vec3> target_left;        // unit bearing, target left camera
    std::optional<Vec3> target_right;       // unit bearing, target right camera
  };

  BearingFactor(std::vector<int> block_ids, const Observation& obs,
                const Transform& T_left_right, double weight_left, double weight_right,
                LossKind loss = LossKind::Huber);

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  Observation obs_;
  Transform T_lr_;
  double weight_left_ = 1.0;
  double weight_right_ = 1.0;
};

// Constrains a landmark's inverse depth from its own anchor-frame stereo
// observation: the anchor left bearing fixes the ray, the right-camera
// bearing of the same feature pins the depth along it. Blocks: [lambda].
class AnchorDepthFactor : public Factor {
 public:
  AnchorDepthFactor(int lambda_block, const Vec3& anchor_left_bearing,
                    const Vec3& anchor_right_bearing, const Transform& T_left_right,
                    double weight, LossKind loss = LossKind::Huber);

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  Vec3 bearing_left_;
  Vec3 bearing_right_;
  Transform T_lr_;
  double weight_ = 1.0;
};

// Preintegrated inertial constraint between consecutive keyframe states,
// whitened with the preintegration's square-root information. Blocks:
// [p_i, q_i, v_i, ba_i, bg_i, p_j, q_j, v_j, ba_j, bg_j].
class ImuFactor : public Factor {
 public:
  ImuFactor(std::vector<int> block_ids, PreintegratedImu pre, const Vec3& gravity_w);

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

  const PreintegratedImu& preintegration() const { return pre_; }

 private:
  PreintegratedImu pre_;
  Vec3 gravity_;
  Eigen::Matrix<double, 15, 15> sqrt_info_;
};

// Ties the body-to-camera extrinsic implied by a keyframe's two pose chains
// (IMU-propagated body pose and visually estimated camera pose) to the shared
// extrinsic estimate: residual [2 vec(q_err); t_err] of
// (T_w_b^-1 * T_w_c) relative to T_b_c, identity weighted. Blocks:
// [q_b, p_b, q_c, p_c, q_bc, p_bc].
class ExtrinsicConsistencyFactor : public Factor {
 public:
  explicit ExtrinsicConsistencyFactor(std::vector<int> block_ids);

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;
};

// Bearing observation of a fixed world point, used to tie window states to a
// loop-closed keyframe whose pose and landmarks are held constant. Blocks:
// [q_j, p_j, q_bc, p_bc]. Deactivates on non-positive predicted depth.
class WorldPointBearingFactor : public Factor {
 public:
  WorldPointBearingFactor(std::vector<int> block_ids, const Vec3& world_point,
                          const Vec3& observed_bearing, double weight,
                          LossKind loss = LossKind::Huber);

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  Vec3 point_w_;
  Vec3 bearing_;
  double weight_ = 1.0;
};

// Gaussian prior produced by marginalization, linearized at stored block
// values: r = offset + sum_k J_k (x_k [-] x0_k), with the manifold difference
// taken per block kind. Rotation blocks fold in the inverse left Jacobian so
// the analytic derivative stays exact away from the linearization point.
class PriorFactor : public Factor {
 public:
  PriorFactor(std::vector<int> block_ids, std::vector<ManifoldKind> kinds,
              std::vector<Eigen::VectorXd> linearization_points, const Eigen::MatrixXd& jacobian,
              const Eigen::VectorXd& offset);

  void evaluate(const std::vector<const Eigen::VectorXd*>& params, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override;

  const std::vector<ManifoldKind>& kinds() const { return kinds_; }
  const std::vector<Eigen::VectorXd>& linearization_points() const { return lin_points_; }
  const std::vector<Eigen::MatrixXd>& jacobian_blocks() const { return jac_blocks_; }
  const Eigen::VectorXd& offset() const { return offset_; }

 private:
  std::vector<ManifoldKind> kinds_;
  std::vector<Eigen::VectorXd> lin_points_;
  std::vector<Eigen::MatrixXd> jac_blocks_;
  Eigen::VectorXd offset_;
};

}  // namespace ums
