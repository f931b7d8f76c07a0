#include "ums/solve/solver.hpp"

#include <chrono>
#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

namespace {

struct BlockSlot {
  ParameterBlock* block = nullptr;
  int offset = -1;       // first tangent column in its group (-1 for constant)
  bool eliminated = false;  // member of the Schur-eliminated group
  std::vector<int> active_dims;  // tangent dims that are free to move
};

struct Layout {
  std::vector<BlockSlot> slots;          // indexed by dense block index
  std::map<int, int> index_of;           // block id -> dense index
  int pose_dim = 0;                      // retained group
  int landmark_dim = 0;                  // eliminated group
};

Layout build_layout(Problem& problem) {
  Layout layout;
  for (auto& [id, block] : problem.blocks()) {
    BlockSlot slot;
    slot.block = &block;
    if (!block.constant) {
      for (int d = 0; d < block.tangent_size(); ++d) {
        const bool frozen = std::find(block.frozen_dims.begin(), block.frozen_dims.end(), d) !=
                            block.frozen_dims.end();
        if (!frozen) slot.active_dims.push_back(d);
      }
    }
    slot.eliminated = block.kind == ManifoldKind::InverseDepth && !slot.active_dims.empty();
    layout.index_of[id] = static_cast<int>(layout.slots.size());
    layout.slots.push_back(std::move(slot));
  }
  for (auto& slot : layout.slots) {
    if (slot.active_dims.empty()) continue;
    if (slot.eliminated) {
      slot.offset = layout.landmark_dim;
      layout.landmark_dim += static_cast<int>(slot.active_dims.size());
    } else {
      slot.offset = layout.pose_dim;
      layout.pose_dim += static_cast<int>(slot.active_dims.size());
    }
  }
  return layout;
}

struct FactorArrays {
  std::vector<const Eigen::VectorXd*> params;
  std::vector<int> slot_index;
};

double evaluate_cost(const Problem& problem, const Layout& layout,
                     const std::vector<Eigen::VectorXd>& values, bool* finite) {
  double cost = 0.0;
  *finite = true;
  std::vector<const Eigen::VectorXd*> params;
  Eigen::VectorXd residual;
  for (const auto& factor : problem.factors()) {
    params.clear();
    for (int id : factor->block_ids()) {
      auto it = layout.index_of.find(id);
      if (it == layout.index_of.end()) {
        raise(ErrorCode::StructureError, "factor references missing block " + std::to_string(id));
      }
      params.push_back(&values[it->second]);
    }
    residual.resize(factor->residual_size());
    factor->evaluate(params, residual, nullptr);
    if (!residual.allFinite()) {
      *finite = false;
      return std::numeric_limits<double>::infinity();
    }
    cost += 0.5 * robust_loss(factor->loss(), residual.squaredNorm()).rho;
  }
  return cost;
}

}  // namespace

SolveReport solve(Problem& problem, const SolverConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t_start] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  Layout layout = build_layout(problem);
  const int np = layout.pose_dim;
  const int nl = layout.landmark_dim;

  // Working copy of all block values, indexed by dense block index.
  std::vector<Eigen::VectorXd> values;
  values.reserve(layout.slots.size());
  for (auto& slot : layout.slots) values.push_back(slot.block->value);

  SolveReport report;
  bool finite = true;
  double cost = evaluate_cost(problem, layout, values, &finite);
  if (!finite) {
    raise(ErrorCode::NumericalFailure, "non-finite residual at the initial point");
  }
  report.initial_cost = cost;
  report.final_cost = cost;

  if (np + nl == 0 || problem.factors().empty()) {
    report.termination = Termination::Converged;
    report.wall_time_ms = elapsed_ms();
    return report;
  }

  double damping = config.initial_damping;
  report.termination = Termination::MaxIterations;

  std::vector<const Eigen::VectorXd*> params;
  std::vector<Eigen::MatrixXd> jacobians;
  Eigen::VectorXd residual;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (config.max_time_ms > 0.0 && elapsed_ms() > config.max_time_ms && iter > 0) {
      report.termination = Termination::MaxIterations;
      break;
    }

    Eigen::MatrixXd h_pp = Eigen::MatrixXd::Zero(np, np);
    Eigen::MatrixXd h_pl = Eigen::MatrixXd::Zero(np, nl);
    Eigen::VectorXd h_ll = Eigen::VectorXd::Zero(nl);  // diagonal, scalar landmarks
    Eigen::VectorXd g_p = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd g_l = Eigen::VectorXd::Zero(nl);

    for (const auto& factor : problem.factors()) {
      const auto& ids = factor->block_ids();
      params.clear();
      std::vector<int> slots;
      for (int id : ids) {
        const int si = layout.index_of.at(id);
        slots.push_back(si);
        params.push_back(&values[si]);
      }
      residual.resize(factor->residual_size());
      jacobians.assign(ids.size(), Eigen::MatrixXd());
      for (size_t k = 0; k < ids.size(); ++k) {
        jacobians[k].resize(factor->residual_size(), layout.slots[slots[k]].block->tangent_size());
      }
      factor->evaluate(params, residual, &jacobians);
      if (!residual.allFinite()) {
        raise(ErrorCode::NumericalFailure, "non-finite residual during iteration");
      }

      const double weight = robust_loss(factor->loss(), residual.squaredNorm()).rho_prime;

      // Accumulate J^T J and J^T r over active tangent dims.
      for (size_t a = 0; a < ids.size(); ++a) {
        const BlockSlot& sa = layout.slots[slots[a]];
        if (sa.active_dims.empty()) continue;
        Eigen::MatrixXd ja(factor->residual_size(), sa.active_dims.size());
        for (size_t d = 0; d < sa.active_dims.size(); ++d) ja.col(d) = jacobians[a].col(sa.active_dims[d]);

        const Eigen::VectorXd jtr = weight * (ja.transpose() * residual);
        if (sa.eliminated) {
          g_l.segment(sa.offset, jtr.size()) += jtr;
        } else {
          g_p.segment(sa.offset, jtr.size()) += jtr;
        }

        for (size_t b = a; b < ids.size(); ++b) {
          const BlockSlot& sb = layout.slots[slots[b]];
          if (sb.active_dims.empty()) continue;
          Eigen::MatrixXd jb(factor->residual_size(), sb.active_dims.size());
          for (size_t d = 0; d < sb.active_dims.size(); ++d) jb.col(d) = jacobians[b].col(sb.active_dims[d]);
          const Eigen::MatrixXd hab = weight * (ja.transpose() * jb);

          if (!sa.eliminated && !sb.eliminated) {
            h_pp.block(sa.offset, sb.offset, hab.rows(), hab.cols()) += hab;
            if (a != b) {
              h_pp.block(sb.offset, sa.offset, hab.cols(), hab.rows()) += hab.transpose();
            }
          } else if (!sa.eliminated && sb.eliminated) {
            h_pl.block(sa.offset, sb.offset, hab.rows(), hab.cols()) += hab;
          } else if (sa.eliminated && !sb.eliminated) {
            h_pl.block(sb.offset, sa.offset, hab.cols(), hab.rows()) += hab.transpose();
          } else {
            // scalar landmark blocks never pair with each other in one factor
            if (slots[a] == slots[b]) {
              h_ll.segment(sa.offset, hab.rows()) += hab.diagonal();
            }
          }
        }
      }
    }

    const double gradient_norm = std::max(np > 0 ? g_p.lpNorm<Eigen::Infinity>() : 0.0,
                                          nl > 0 ? g_l.lpNorm<Eigen::Infinity>() : 0.0);
    if (gradient_norm < config.gradient_tolerance) {
      report.termination = Termination::Converged;
      break;
    }

    bool stepped = false;
    while (!stepped) {
      // Damped system; Schur complement over the landmark diagonal.
      Eigen::MatrixXd h_pp_d = h_pp;
      for (int i = 0; i < np; ++i) {
        h_pp_d(i, i) += damping * std::max(h_pp(i, i), 1e-12) + 1e-300;
      }
      Eigen::VectorXd h_ll_d = h_ll;
      for (int i = 0; i < nl; ++i) {
        h_ll_d(i) += damping * std::max(h_ll(i), 1e-12) + 1e-12;
      }

      Eigen::VectorXd dp, dl;
      if (nl > 0) {
        const Eigen::VectorXd inv_ll = h_ll_d.cwiseInverse();
        const Eigen::MatrixXd b_dinv = h_pl * inv_ll.asDiagonal();
        const Eigen::MatrixXd s = h_pp_d - b_dinv * h_pl.transpose();
        const Eigen::VectorXd rhs = -(g_p - b_dinv * g_l);
        dp = np > 0 ? Eigen::VectorXd(s.ldlt().solve(rhs)) : Eigen::VectorXd();
        dl = -(inv_ll.asDiagonal() * (g_l + h_pl.transpose() * (np > 0 ? dp : Eigen::VectorXd::Zero(0))));
      } else {
        dp = h_pp_d.ldlt().solve(-g_p);
        dl.resize(0);
      }

      bool solvable = (np == 0 || dp.allFinite()) && (nl == 0 || dl.allFinite());
      std::vector<Eigen::VectorXd> candidate = values;
      if (solvable) {
        for (size_t s = 0; s < layout.slots.size(); ++s) {
          const BlockSlot& slot = layout.slots[s];
          if (slot.active_dims.empty()) continue;
          Eigen::VectorXd delta = Eigen::VectorXd::Zero(slot.block->tangent_size());
          const Eigen::VectorXd& src = slot.eliminated ? dl : dp;
          for (size_t d = 0; d < slot.active_dims.size(); ++d) {
            delta(slot.active_dims[d]) = src(slot.offset + d);
          }
          candidate[s] = manifold_plus(slot.block->kind, values[s], delta);
        }
      }

      double new_cost = std::numeric_limits<double>::infinity();
      if (solvable) {
        bool cand_finite = true;
        new_cost = evaluate_cost(problem, layout, candidate, &cand_finite);
        if (!cand_finite) new_cost = std::numeric_limits<double>::infinity();
      }

      if (new_cost < cost) {
        const double decrease = cost - new_cost;
        values = std::move(candidate);
        cost = new_cost;
        damping = std::max(damping / 3.0, 1e-14);
        stepped = true;
        ++report.iterations;
        if (decrease < config.cost_tolerance * std::max(cost, 1.0)) {
          report.termination = Termination::Converged;
        }
      } else {
        // A rejected step that changes the cost by less than the tolerance,
        // taken from a point with a near-zero gradient, means we are sitting
        // on the minimum and no further progress is possible.
        const bool tiny_change = solvable && std::isfinite(new_cost) &&
                                 std::abs(new_cost - cost) <=
                                     config.cost_tolerance * std::max(cost, 1.0);
        if (tiny_change &&
            gradient_norm <= std::sqrt(config.cost_tolerance) * std::max(1.0, cost)) {
          report.termination = Termination::Converged;
          break;
        }
        damping = std::max(damping * 4.0, 1e-10);
        if (damping > 1e14) {
          report.termination = Termination::TrustRegionFailure;
          break;
        }
      }
    }
    if (!stepped) break;  // trust region collapsed
    if (report.termination == Termination::Converged) break;
    if (config.max_time_ms > 0.0 && elapsed_ms() > config.max_time_ms) break;
  }

  for (size_t s = 0; s < layout.slots.size(); ++s) {
    layout.slots[s].block->value = values[s];
  }
  report.final_cost = cost;
  report.wall_time_ms = elapsed_ms();
  return report;
}

}  // namespace ums
