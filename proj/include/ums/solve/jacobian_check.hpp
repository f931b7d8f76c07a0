#pragma once

#include "ums/solve/problem.hpp"

namespace ums {

// Central finite-difference verification of a factor's analytic Jacobians.
// Entries are compared after normalizing by the largest Jacobian magnitude of
// the factor, with an absolute floor of 1e-8; returns the worst relative error.
double check_jacobian(const Factor& factor, const std::vector<ParameterBlock>& blocks,
                      double step = 1e-6);

}  // namespace ums
