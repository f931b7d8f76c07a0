#include "ums/backend/marginalize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ums/core/error.hpp"
#include "ums/solve/loss.hpp"

namespace ums {

namespace {

struct BlockSlot {
  const ParameterBlock* block = nullptr;
  int offset = 0;  // tangent offset within its partition
};

}  // namespace

std::shared_ptr<PriorFactor> marginalize(const std::vector<ParameterBlock>& blocks,
                                         const std::vector<std::shared_ptr<Factor>>& factors,
                                         const std::set<int>& eliminated_ids) {
  if (eliminated_ids.empty()) {
    raise(ErrorCode::StructureError, "marginalization needs a non-empty elimination set");
  }
  std::map<int, const ParameterBlock*> by_id;
  for (const ParameterBlock& b : blocks) by_id.emplace(b.id, &b);
  for (int id : eliminated_ids) {
    if (!by_id.count(id)) {
      raise(ErrorCode::StructureError,
            "eliminated block " + std::to_string(id) + " is not among the given blocks");
    }
  }

  // Partition the referenced blocks: eliminated first, survivors after.
  std::set<int> referenced;
  for (const auto& factor : factors) {
    for (int id : factor->block_ids()) {
      if (!by_id.count(id)) {
        raise(ErrorCode::StructureError,
              "factor references missing block " + std::to_string(id));
      }
      referenced.insert(id);
    }
  }

  std::map<int, BlockSlot> eliminated;
  std::map<int, BlockSlot> kept;
  int dim_e = 0;
  int dim_k = 0;
  for (int id : referenced) {
    const ParameterBlock* b = by_id.at(id);
    if (eliminated_ids.count(id)) {
      eliminated[id] = {b, dim_e};
      dim_e += b->tangent_size();
    } else {
      kept[id] = {b, dim_k};
      dim_k += b->tangent_size();
    }
  }
  if (kept.empty()) return nullptr;

  // Dense normal equations over [eliminated | kept] tangent coordinates, with
  // robust losses folded in as IRLS weights at the linearization point.
  const int dim = dim_e + dim_k;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);

  auto slot_offset = [&](int id) {
    auto it = eliminated.find(id);
    if (it != eliminated.end()) return it->second.offset;
    return dim_e + kept.at(id).offset;
  };

  for (const auto& factor : factors) {
    std::vector<const Eigen::VectorXd*> params;
    params.reserve(factor->block_ids().size());
    for (int id : factor->block_ids()) params.push_back(&by_id.at(id)->value);

    Eigen::VectorXd residual;
    std::vector<Eigen::MatrixXd> jacobians(factor->block_ids().size());
    factor->evaluate(params, residual, &jacobians);

    double weight = 1.0;
    if (factor->loss() != LossKind::None) {
      weight = robust_loss(factor->loss(), residual.squaredNorm()).rho_prime;
    }
    if (weight <= 0.0) continue;

    const std::size_t n_blocks = factor->block_ids().size();
    for (std::size_t a = 0; a < n_blocks; ++a) {
      const int id_a = factor->block_ids()[a];
      const int off_a = slot_offset(id_a);
      const int size_a = by_id.at(id_a)->tangent_size();
      g.segment(off_a, size_a) += weight * jacobians[a].transpose() * residual;
      for (std::size_t c = 0; c < n_blocks; ++c) {
        const int id_c = factor->block_ids()[c];
        h.block(slot_offset(id_a), slot_offset(id_c), size_a,
                by_id.at(id_c)->tangent_size()) +=
            weight * jacobians[a].transpose() * jacobians[c];
      }
    }
  }

  // Schur complement onto the survivors. The eliminated information matrix is
  // inverted through its eigendecomposition so unconstrained directions
  // (zero eigenvalues) contribute nothing instead of blowing up.
  const Eigen::MatrixXd h_ee = h.topLeftCorner(dim_e, dim_e);
  const Eigen::MatrixXd h_ek = h.topRightCorner(dim_e, dim_k);
  Eigen::MatrixXd h_kk = h.bottomRightCorner(dim_k, dim_k);
  Eigen::VectorXd g_k = g.tail(dim_k);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_e(h_ee);
  const double tol_e = std::max(1e-12 * eig_e.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv_e = eig_e.eigenvalues();
  for (int i = 0; i < inv_e.size(); ++i) inv_e[i] = inv_e[i] > tol_e ? 1.0 / inv_e[i] : 0.0;
  const Eigen::MatrixXd h_ee_inv =
      eig_e.eigenvectors() * inv_e.asDiagonal() * eig_e.eigenvectors().transpose();

  h_kk -= h_ek.transpose() * h_ee_inv * h_ek;
  g_k -= h_ek.transpose() * (h_ee_inv * g.head(dim_e));

  // Refactor the reduced information as a linear residual r = offset + J dx
  // with J^T J = H and J^T offset = g, via the eigendecomposition square root.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_k(h_kk);
  const double max_eig = eig_k.eigenvalues().cwiseAbs().maxCoeff();
  if (!(max_eig > 0.0)) return nullptr;
  const double tol_k = 1e-10 * max_eig;
  int rank = 0;
  for (int i = 0; i < eig_k.eigenvalues().size(); ++i) rank += eig_k.eigenvalues()[i] > tol_k;
  if (rank == 0) return nullptr;

  Eigen::MatrixXd jacobian(rank, dim_k);
  Eigen::VectorXd offset(rank);
  int row = 0;
  for (int i = 0; i < eig_k.eigenvalues().size(); ++i) {
    if (eig_k.eigenvalues()[i] <= tol_k) continue;
    const double sqrt_eig = std::sqrt(eig_k.eigenvalues()[i]);
    jacobian.row(row) = sqrt_eig * eig_k.eigenvectors().col(i).transpose();
    offset[row] = eig_k.eigenvectors().col(i).dot(g_k) / sqrt_eig;
    ++row;
  }

  std::vector<int> kept_ids;
  std::vector<ManifoldKind> kinds;
  std::vector<Eigen::VectorXd> lin_points;
  for (const auto& [id, slot] : kept) {
    kept_ids.push_back(id);
    kinds.push_back(slot.block->kind);
    lin_points.push_back(slot.block->value);
  }
  return std::make_shared<PriorFactor>(std::move(kept_ids), std::move(kinds),
                                       std::move(lin_points), jacobian, offset);
}

}  // namespace ums
