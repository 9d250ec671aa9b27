#include "csda/adjoint.hpp"

#include <cmath>
#include <stdexcept>

namespace csda {

std::vector<double> dose(const DoseModel& model, const PhaseGrid& grid,
                         const Field& psi) {
  std::vector<double> d(grid.n_spatial(), 0.0);
  for (int s = 0; s < grid.species(); ++s) {
    if (!model.varsigma[s]) continue;
    for (int ix = 0; ix < grid.n_spatial(); ++ix) {
      double acc = 0.0;
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          acc += grid.ww(a) * grid.wE(k) *
                 model.varsigma[s](grid.x(ix), grid.E(k)) *
                 psi.at(s, ix, a, k);
      d[ix] += acc;
    }
  }
  return d;
}

Field dose_adjoint(const DoseModel& model, const PhaseGrid& grid,
                   const std::vector<double>& d) {
  Field out(grid);
  for (int s = 0; s < grid.species(); ++s) {
    if (!model.varsigma[s]) continue;
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          out.at(s, ix, a, k) =
              model.varsigma[s](grid.x(ix), grid.E(k)) * d[ix];
  }
  return out;
}

Problem reverse_problem(const Problem& fwd, const Field& f_star,
                        const BoundaryField& g_star) {
  const PhaseGrid& grid = fwd.grid();
  if (grid.antipode(0) < 0)
    throw std::invalid_argument(
        "solve_adjoint: angular grid must be closed under w -> -w "
        "(even n_phi)");
  if (g_star.orientation() != Orientation::Outflow)
    throw std::invalid_argument("solve_adjoint: g* must be outflow data");
  const double Esum = grid.E0() + grid.Em();

  // Reversed cross sections, stopping powers and kernels.
  ScatterData scatter;
  scatter.Sigma.resize(grid.species());
  std::vector<std::optional<StoppingPower>> stopping(grid.species());
  for (int s = 0; s < grid.species(); ++s) {
    if (auto fn = fwd.sigma(s)) {
      scatter.Sigma[s] = [fn, Esum](const Vec3& x, const Vec3& w, double E) {
        return fn(x, -w, Esum - E);
      };
    }
    if (fwd.charged(s)) {
      auto S = fwd.stopping()[s]->S;
      stopping[s] = StoppingPower::from_function(
          [S, Esum](double E) { return S(Esum - E); }, grid.E0(), grid.Em());
    }
  }
  KernelSet rev = KernelSet::zero(grid.species());
  for (int k = 0; k < grid.species(); ++k)
    for (int j = 0; j < grid.species(); ++j) {
      const KernelEntry& e = fwd.kernels().entry(j, k);
      if (!e.fn) continue;
      KernelEntry& re = rev.entry(k, j);
      re.in_energy_group = e.in_energy_group;
      auto fn = e.fn;
      re.fn = [fn, Esum](const Vec3& x, const Vec3& wp, const Vec3& w,
                         double Ep, double E) {
        return fn(x, -w, -wp, Esum - E, Esum - Ep);
      };
    }

  // Reversed data on the relabeled nodes.
  Field frev(grid);
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          frev.at(s, ix, a, k) =
              f_star.at(s, ix, grid.antipode(a), grid.energy_mirror(k));
  BoundaryField grev(grid, Orientation::Inflow);
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < grev.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          grev.at(s, b, a, k) =
              g_star.at(s, b, grid.antipode(a), grid.energy_mirror(k));

  return Problem(fwd.domain(), grid, std::move(scatter), std::move(rev),
                 std::move(stopping), std::move(frev), std::move(grev),
                 fwd.ray());
}

AdjointResult solve_adjoint(const Problem& fwd, const Field& f_star,
                            const BoundaryField& g_star,
                            const SolveOptions& opts) {
  const PhaseGrid& grid = fwd.grid();
  Problem rev = reverse_problem(fwd, f_star, g_star);
  // The reversed system is advective (-S dchi/dE) rather than conservative.
  SolveOptions inner = opts;
  inner.with_traces = true;  // gamma_+(chi) becomes gamma_-(psi*)
  SolveResult chi = source_iteration_impl(rev, inner, CharMode::Advective);

  AdjointResult res;
  res.report = chi.report;
  res.psi_star = Field(grid);
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          res.psi_star.at(s, ix, a, k) =
              chi.psi.at(s, ix, grid.antipode(a), grid.energy_mirror(k));
  res.trace_minus = BoundaryField(grid, Orientation::Inflow);
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < res.trace_minus.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          res.trace_minus.at(s, b, a, k) = chi.trace_plus.at(
              s, b, grid.antipode(a), grid.energy_mirror(k));
  return res;
}

double importance_dose(const Problem& p, const DoseModel& model,
                       const Vec3& x0, double mollify_radius,
                       const SolveOptions& opts) {
  const PhaseGrid& grid = p.grid();
  if (!p.domain().contains(x0))
    throw std::invalid_argument("importance_dose: x0 must lie inside G");
  if (mollify_radius < 2.0 * grid.hx())
    throw std::invalid_argument(
        "importance_dose: mollify radius below two spatial cells");
  // Radial bump, normalized to unit mass on the grid.
  std::vector<double> eta(grid.n_spatial(), 0.0);
  double mass = 0.0;
  for (int ix = 0; ix < grid.n_spatial(); ++ix) {
    const double r = norm(grid.x(ix) - x0) / mollify_radius;
    if (r < 1.0) eta[ix] = std::exp(-1.0 / (1.0 - r * r));
    mass += grid.wx(ix) * eta[ix];
  }
  if (!(mass > 0.0))
    throw std::invalid_argument("importance_dose: empty mollifier support");
  for (double& v : eta) v /= mass;

  const Field f_star = dose_adjoint(model, grid, eta);
  const BoundaryField g_star(grid, Orientation::Outflow);
  const AdjointResult adj = solve_adjoint(p, f_star, g_star, opts);
  return l2_inner(grid, p.f(), adj.psi_star) +
         t2_boundary_inner(p.g(), adj.trace_minus, false);
}

}  // namespace csda
