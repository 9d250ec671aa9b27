#pragma once

// Inverse treatment planning: quadratic dose-misfit cost over region labels,
// the adjoint-based gradient in the control metric X (T2 for photons, T2
// plus an energy difference-quotient seminorm for charged species),
// projection onto the admissible set, projected-gradient descent with
// Armijo backtracking, and the optimality-system fixed-point residual.

#include <vector>

#include "csda/adjoint.hpp"
#include "csda/solver.hpp"

namespace csda {

enum class Region : int { Target = 0, Critical = 1, Normal = 2 };

struct Prescription {
  std::vector<Region> region;   // per spatial node
  std::vector<double> target;   // prescribed dose on the node's region
  double cT = 1.0, cC = 1.0, cN = 1.0;
  double creg = 1e-2;           // control regularization weight c

  double region_weight(Region r) const {
    return r == Region::Target ? cT : (r == Region::Critical ? cC : cN);
  }
};

// <a,b>_X over the active inflow nodes.
double control_inner_X(const Problem& p, const BoundaryField& a,
                       const BoundaryField& b);
double control_norm_X(const Problem& p, const BoundaryField& g);

// J(g) = sum_R c_R |d_R - D(psi(g))|^2_{L2(R)} + c |g|_X^2 with f = 0.
double cost_J(Problem& p, const Prescription& pres, const BoundaryField& g,
              const DoseModel& dose_model, const SolveOptions& opts);

// X-gradient of J at g: the exact transpose of the discrete forward chain
// (lift -> Neumann series -> dose) plus the regularization term.
BoundaryField grad_J(Problem& p, const Prescription& pres,
                     const BoundaryField& g, const DoseModel& dose_model,
                     const SolveOptions& opts);

// Clamp to g >= 0, zero the Em slice of charged species and every masked
// (non-inflow) entry.
BoundaryField project_admissible(const Problem& p, const BoundaryField& g);

struct OptimizeHistory {
  std::vector<double> J;
  std::vector<double> step;
  std::vector<double> grad_norm;
  int iterations = 0;
  bool converged = false;
  bool line_search_failure = false;
};

struct OptimizeOptions {
  double tol = 1e-6;       // projected-gradient fixed-point tolerance
  int max_outer = 50;
  double step0 = 1.0;      // initial trial step, warm-started across iters
  double beta = 0.5;       // Armijo backtracking factor
  double sigma = 1e-4;     // Armijo sufficient-decrease constant
  int max_backtrack = 40;
};

std::pair<BoundaryField, OptimizeHistory> optimize(
    Problem& p, const Prescription& pres, const DoseModel& dose_model,
    const BoundaryField& g0, const OptimizeOptions& oopts,
    const SolveOptions& sopts);

// |g - Proj(g - grad J(g))|_X at unit step: the variational-inequality
// fixed-point residual.
double optimality_residual(Problem& p, const Prescription& pres,
                           const BoundaryField& g, const DoseModel& dose_model,
                           const SolveOptions& opts);

// Mild-solution diagnostic (1/c) (misfit trace representative)_+; comparison
// value only, never the optimizer.
BoundaryField mild_control_diagnostic(Problem& p, const Prescription& pres,
                                      const BoundaryField& g,
                                      const DoseModel& dose_model,
                                      const SolveOptions& opts);

}  // namespace csda
