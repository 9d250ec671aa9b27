#pragma once

// Production solvers for the coupled CSDA transport system: exponential
// change of unknown, source iteration (Neumann series) on the tilted system,
// a dense direct oracle for small problems, the primary/secondary split, and
// the bilinear-form / a-priori diagnostics behind every convergence claim.

#include <memory>
#include <optional>
#include <vector>

#include "csda/characteristics.hpp"
#include "csda/collision.hpp"
#include "csda/geometry.hpp"
#include "csda/grid.hpp"

namespace csda {

struct SolveReport {
  int iterations = 0;
  std::vector<double> residuals;
  bool converged = false;
  bool norm_bound_checked = false;
  double contraction_estimate = -1.0;  // < 0 when not measured
  double apriori_ratio = -1.0;
  double C = 0.0, c = 0.0, c_prime = 0.0;
  double M1 = 0.0, M2 = 0.0;
};

// A fully-specified transport problem; constants (C, c, c') are always
// recomputed here, never user-supplied.
class Problem {
 public:
  Problem(const Domain& domain, const PhaseGrid& grid, ScatterData scatter,
          KernelSet kernels,
          std::vector<std::optional<StoppingPower>> stopping, Field f,
          BoundaryField g, RaySettings ray = {});

  const Domain& domain() const { return domain_; }
  const PhaseGrid& grid() const { return grid_; }
  const ScatterData& scatter() const { return scatter_; }
  const KernelSet& kernels() const { return kernels_; }
  const std::vector<std::optional<StoppingPower>>& stopping() const {
    return stopping_;
  }
  const Field& f() const { return f_; }
  const BoundaryField& g() const { return g_; }
  const RaySettings& ray() const { return ray_; }
  const EnergyMap& emap(int s) const { return emaps_[s]; }
  bool charged(int s) const { return stopping_[s].has_value(); }

  double C() const { return C_; }
  double c() const { return c_; }
  double c_prime() const { return c_prime_; }
  const KernelApplier& applier_tilted() const { return *tilted_; }
  const KernelApplier& applier() const { return *plain_; }

  // Energy-independent total cross section of species s (charged path).
  XsFnXW sigma_xw(int s) const;
  XsFn sigma(int s) const { return scatter_.Sigma[s]; }

  Field& mutable_f() { return f_; }
  BoundaryField& mutable_g() { return g_; }
  void set_boundary(const BoundaryField& g);

 private:
  Domain domain_;
  PhaseGrid grid_;
  ScatterData scatter_;
  KernelSet kernels_;
  std::vector<std::optional<StoppingPower>> stopping_;
  Field f_;
  BoundaryField g_;
  RaySettings ray_;
  double C_ = 0.0, c_ = 0.0, c_prime_ = 0.0;
  std::vector<EnergyMap> emaps_;
  std::shared_ptr<KernelApplier> tilted_, plain_;
};

// C = max over charged species of max{q_j, 0} / kappa_j.
double compute_C(const std::vector<std::optional<StoppingPower>>& stopping);

enum class TiltDirection { Forward, Inverse };

// phi = e^{+-CE} psi, pointwise on energy nodes.
Field exp_transform(const PhaseGrid& grid, const Field& psi, double C,
                    TiltDirection dir);
BoundaryField exp_transform(const PhaseGrid& grid, const BoundaryField& g,
                            double C, TiltDirection dir);

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 200;
  bool estimate_contraction = false;  // 10 power iterations, reported
  bool with_traces = true;            // extract gamma_+ and the E0 slice
};

struct SolveResult {
  Field psi;
  BoundaryField trace_plus;       // gamma_+(psi) via the point formulas
  std::vector<double> slice_E0;   // psi(.,.,E0), (species, spatial, angular)
  SolveReport report;
};

// Neumann-series source iteration on the tilted system:
//   u = primary characteristic solution, then w <- P0^{-1}(K_C (u + w)),
//   psi = e^{-CE} (u_C + w).
SolveResult source_iteration(const Problem& problem, const SolveOptions& opts);

// Mode-parameterized variant shared with the reversed (adjoint) solve.
SolveResult source_iteration_impl(const Problem& problem,
                                  const SolveOptions& opts, CharMode mode);

// Dense direct solve of (I - P0^{-1} K_C) w = P0^{-1} K_C u_C by column
// probing; the linear-algebra oracle for source_iteration.
SolveResult dense_oracle_solve(const Problem& problem,
                               int max_unknowns = 5000);

// Three-species solve via the primary/secondary split; validates species
// count and the charged compatibility condition.
SolveResult solve_coupled(const Problem& problem, const SolveOptions& opts);

// The coupled bilinear form of the variational formulation, every term
// evaluated by quadrature (E-derivative central, w.grad by central lattice
// stencils with one-sided closure).
double bilinear_B(const Problem& problem, const TraceField& phi,
                  const TraceField& v, bool with_C);

// Adjoint bilinear form B0*(psi*, v); the duality audit mate of bilinear_B.
double bilinear_B_adjoint(const Problem& problem, const TraceField& psi_star,
                          const TraceField& v);

// |psi|_H / [(e^{C Em}/c') (|f| + |g|_T2)]; <= 1 + tolerance for converged
// solutions when c' > 0. Returns -1 when c' <= 0 (check skipped).
double apriori_check(const Problem& problem, const SolveResult& sol);

// Green-formula defect |<P psi, v> - <psi, P'v> - boundary - endpoint terms|.
double green_residual(const Problem& problem, const TraceField& psi,
                      const TraceField& v);

// Discrete transport residual of a solution at gate-clean interior nodes
// (L2 over the sampled set); drives the refinement-order checks.
double transport_residual(const Problem& problem, const Field& psi,
                          const Field& rhs);

// Shared helpers for wrapping discrete data as characteristic-solver input.
VolData field_data(const PhaseGrid& grid, const Field& f, int s);
BdryData boundary_data(const BoundaryField& g, int s);

// Primary (uncollided) solution of the untilted problem, per species.
Field primary_solution(const Problem& problem, const Field& f,
                       const BoundaryField& g, CharMode mode);

}  // namespace csda
