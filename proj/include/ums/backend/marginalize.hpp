#pragma once

#include <memory>
#include <set>
#include <vector>

#include "ums/backend/factors.hpp"
#include "ums/solve/problem.hpp"

namespace ums {

// Gaussian elimination of a set of parameter blocks from a factor set.
//
// Every factor is linearized at the blocks' current values (robust losses
// enter through their reweighting at the linearization point), the normal
// equations are assembled densely, the eliminated blocks are removed by Schur
// complement, and the reduced information is refactored into a linear prior
// on the surviving blocks. Directions the factor set leaves unconstrained
// (for example the global position of a marginalized chain) carry zero
// information and are dropped rather than inverted.
//
// `blocks` must contain every block any factor references; `eliminated_ids`
// must be a subset of those blocks. Returns nullptr when the factors carry no
// information about the surviving blocks at all. Throws StructureError for a
// factor referencing a missing block or an empty elimination set.
std::shared_ptr<PriorFactor> marginalize(const std::vector<ParameterBlock>& blocks,
                                         const std::vector<std::shared_ptr<Factor>>& factors,
                                         const std::set<int>& eliminated_ids);

}  // namespace ums
