#include "ums/solve/loss.hpp"

#include <cmath>
#include <string>

#include "ums/core/error.hpp"

namespace ums {

LossEval robust_loss(LossKind kind, double s) {
  if (s < 0.0) {
    raise(ErrorCode::NegativeInput, "squared norm " + std::to_string(s));
  }
  if (kind == LossKind::None || s <= 1.0) {
    return {s, 1.0};
  }
  const double root = std::sqrt(s);
  return {2.0 * root - 1.0, 1.0 / root};
}

}  // namespace ums
