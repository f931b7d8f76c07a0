#pragma once

#include <map>
#include <memory>
#include <vector>

#include "ums/core/rotation.hpp"
#include "ums/solve/loss.hpp"

namespace ums {

// Parameterizations the solver understands. Rotation blocks hold a unit
// quaternion (w, x, y, z) updated by a left (world-frame) perturbation
// q <- exp(delta) * q; InverseDepth blocks are scalars kept positive.
enum class ManifoldKind { Euclidean, Rotation, InverseDepth };

struct ParameterBlock {
  int id = 0;
  ManifoldKind kind = ManifoldKind::Euclidean;
  Eigen::VectorXd value;
  bool constant = false;
  std::vector<int> frozen_dims;  // tangent directions pinned for gauge fixing

  int ambient_size() const { return static_cast<int>(value.size()); }
  int tangent_size() const { return kind == ManifoldKind::Rotation ? 3 : ambient_size(); }
};

Eigen::VectorXd manifold_plus(ManifoldKind kind, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& delta);
// Tangent difference x (-) x0; inverse of manifold_plus to first order.
Eigen::VectorXd manifold_minus(ManifoldKind kind, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& x0);

Eigen::VectorXd rotation_to_vector(const Rotation& r);
Rotation rotation_from_vector(const Eigen::VectorXd& v);

// Residual term. `evaluate` fills the unweighted residual and, when requested,
// Jacobians with respect to each block's tangent space. Robust loss and any
// extra downweighting are applied by the solver.
class Factor {
 public:
  Factor(int residual_size, std::vector<int> block_ids, LossKind loss = LossKind::None)
      : residual_size_(residual_size), block_ids_(std::move(block_ids)), loss_(loss) {}
  virtual ~Factor() = default;

  virtual void evaluate(const std::vector<const Eigen::VectorXd*>& params,
                        Eigen::VectorXd& residual,
                        std::vector<Eigen::MatrixXd>* jacobians) const = 0;

  int residual_size() const { return residual_size_; }
  const std::vector<int>& block_ids() const { return block_ids_; }
  LossKind loss() const { return loss_; }
  void set_loss(LossKind loss) { loss_ = loss; }

 private:
  int residual_size_;
  std::vector<int> block_ids_;
  LossKind loss_;
};

class Problem {
 public:
  ParameterBlock& add_block(ParameterBlock block);
  void add_factor(std::shared_ptr<Factor> factor) { factors_.push_back(std::move(factor)); }

  ParameterBlock& block(int id);
  const ParameterBlock& block(int id) const;
  bool has_block(int id) const { return blocks_.count(id) > 0; }

  std::map<int, ParameterBlock>& blocks() { return blocks_; }
  const std::map<int, ParameterBlock>& blocks() const { return blocks_; }
  const std::vector<std::shared_ptr<Factor>>& factors() const { return factors_; }
  std::vector<std::shared_ptr<Factor>>& factors() { return factors_; }

 private:
  std::map<int, ParameterBlock> blocks_;
  std::vector<std::shared_ptr<Factor>> factors_;
};

}  // namespace ums
