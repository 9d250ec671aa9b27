#pragma once

// Trotter-splitting solver: the four explicit factor semigroups (gated
// spatial translation, gated energy advection, multiplicative decay, and the
// truncated Taylor exponential of the collision operator), their product,
// and the time integration that realizes the resolvent.

#include <functional>

#include "csda/collision.hpp"
#include "csda/grid.hpp"
#include "csda/solver.hpp"

namespace csda {

struct SplitConfig {
  int n_split = 16;       // Trotter substeps per time node
  double T_max = 20.0;    // truncation of the time integral
  int n_t = 64;           // Simpson nodes (rounded up to even intervals)
  int K_taylor_terms = 8; // N0 for e^{tK}
};

// (T_A0(t) f)(x,w,E) = H(t(x,w) - t) f(x - t w, w, E).
Field semigroup_A0(const Domain& domain, const PhaseGrid& grid, double t,
                   const Field& f);

// Gated energy advection with the per-x stopping-power density ratio.
Field semigroup_B0(const PhaseGrid& grid,
                   const std::function<double(const Vec3&, double)>& S,
                   double t, const Field& f);

// Pointwise e^{-t a(x,w,E)} f.
Field semigroup_mult(const PhaseGrid& grid,
                     const std::function<double(const Vec3&, const Vec3&,
                                                double)>& a,
                     double t, const Field& f);

// Truncated Taylor sum of e^{t K_C}; warns (returns tail estimate) when
// t |K| exceeds the truncation sanity bound.
struct SemigroupKResult {
  Field value;
  double tail_estimate = 0.0;
  bool truncation_warning = false;
};
SemigroupKResult semigroup_K(const KernelApplier& K, double t, const Field& f,
                             int N0);

// psi ~ e^{-CE} [ int_0^Tmax (product of the four factors at t/n)^n f dt
//                 + L g ], single charged species, c > 0 required.
Field trotter_resolvent_solve(const Problem& problem, const SplitConfig& cfg);

}  // namespace csda
