#pragma once

// Dose functional, its multiplication-type adjoint, the adjoint transport
// solve by problem reversal (w -> -w, E -> E0 + Em - E turns the adjoint
// system into a forward advective CSDA system), and importance-function dose
// reconstruction.

#include <vector>

#include "csda/grid.hpp"
#include "csda/solver.hpp"

namespace csda {

struct DoseModel {
  // varsigma[j](x, E) >= 0 per species.
  std::vector<std::function<double(const Vec3&, double)>> varsigma;
};

// D(x) = sum_j int varsigma_j psi_j dw dE on the spatial nodes.
std::vector<double> dose(const DoseModel& model, const PhaseGrid& grid,
                         const Field& psi);

// D* d = (varsigma_1, varsigma_2, varsigma_3) d, constant in angle.
Field dose_adjoint(const DoseModel& model, const PhaseGrid& grid,
                   const std::vector<double>& d);

struct AdjointResult {
  Field psi_star;
  BoundaryField trace_minus;  // gamma_-(psi*), inflow-oriented
  SolveReport report;
};

// Solves T* psi* = f*, psi*|Gamma_+ = g*, psi*_j(.,.,E0) = 0 for charged j.
// g_star must be outflow-oriented; requires an antipode-closed angular grid
// (even n_phi).
AdjointResult solve_adjoint(const Problem& forward, const Field& f_star,
                            const BoundaryField& g_star,
                            const SolveOptions& opts);

// The reversed forward problem backing solve_adjoint (exposed for the
// duality diagnostics).
Problem reverse_problem(const Problem& forward, const Field& f_star,
                        const BoundaryField& g_star);

// D(x0) = <f, Psi*_x0> + <g, gamma_-(Psi*_x0)>_T2 with the point-dose source
// mollified by a radial bump of the given radius (grid-normalized mass 1).
double importance_dose(const Problem& problem, const DoseModel& model,
                       const Vec3& x0, double mollify_radius,
                       const SolveOptions& opts);

}  // namespace csda
