#pragma once

#include "ums/solve/problem.hpp"

namespace ums {

enum class Termination { Converged, MaxIterations, TrustRegionFailure };

struct SolverConfig {
  int max_iterations = 20;
  double cost_tolerance = 1e-9;      // relative cost decrease
  double gradient_tolerance = 1e-12; // infinity norm of the gradient
  double initial_damping = 1e-10;    // relative to the Hessian diagonal
  double max_time_ms = 0.0;          // 0 = unlimited
};

struct SolveReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  Termination termination = Termination::MaxIterations;
  double wall_time_ms = 0.0;
};

// Levenberg-Marquardt with robust reweighting and Schur elimination of the
// scalar InverseDepth blocks. Updates block values in place; only accepted
// steps are kept, so final_cost <= initial_cost. Throws StructureError for
// factors referencing missing blocks and NumericalFailure when the initial
// residual evaluation is not finite.
SolveReport solve(Problem& problem, const SolverConfig& config = SolverConfig());

}  // namespace ums
