#pragma once

namespace ums {

enum class LossKind { None, Huber };

struct LossEval {
  double rho = 0.0;        // robustified cost for squared norm s
  double rho_prime = 0.0;  // d rho / d s, used as the IRLS weight
};

// Huber in terms of the squared residual norm s, threshold at s = 1 (factors
// whiten their residuals, so the knee sits at one standard deviation):
//   rho(s) = s            for s <= 1
//   rho(s) = 2 sqrt(s) - 1 for s > 1
// Throws NegativeInput for s < 0.
LossEval robust_loss(LossKind kind, double s);

}  // namespace ums
