#include "ums/solve/jacobian_check.hpp"

#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

double check_jacobian(const Factor& factor, const std::vector<ParameterBlock>& blocks,
                      double step) {
  if (blocks.size() != factor.block_ids().size()) {
    raise(ErrorCode::StructureError, "block count does not match factor");
  }

  std::vector<Eigen::VectorXd> values;
  for (const auto& b : blocks) values.push_back(b.value);
  std::vector<const Eigen::VectorXd*> params;
  for (const auto& v : values) params.push_back(&v);

  Eigen::VectorXd residual(factor.residual_size());
  std::vector<Eigen::MatrixXd> analytic(blocks.size());
  for (size_t k = 0; k < blocks.size(); ++k) {
    analytic[k].resize(factor.residual_size(), blocks[k].tangent_size());
  }
  factor.evaluate(params, residual, &analytic);

  double scale = 1e-8;
  for (const auto& j : analytic) {
    if (j.size() > 0) scale = std::max(scale, j.cwiseAbs().maxCoeff());
  }

  double worst = 0.0;
  Eigen::VectorXd r_plus(factor.residual_size()), r_minus(factor.residual_size());
  for (size_t k = 0; k < blocks.size(); ++k) {
    const int tangent = blocks[k].tangent_size();
    for (int d = 0; d < tangent; ++d) {
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(tangent);
      delta(d) = step;
      const Eigen::VectorXd saved = values[k];
      values[k] = manifold_plus(blocks[k].kind, saved, delta);
      factor.evaluate(params, r_plus, nullptr);
      delta(d) = -step;
      values[k] = manifold_plus(blocks[k].kind, saved, delta);
      factor.evaluate(params, r_minus, nullptr);
      values[k] = saved;

      const Eigen::VectorXd numeric = (r_plus - r_minus) / (2.0 * step);
      for (int row = 0; row < factor.residual_size(); ++row) {
        const double denom = std::max(scale, std::max(std::abs(numeric(row)), std::abs(analytic[k](row, d))));
        worst = std::max(worst, std::abs(numeric(row) - analytic[k](row, d)) / denom);
      }
    }
  }
  return worst;
}

}  // namespace ums
