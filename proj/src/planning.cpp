#include "csda/planning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csda {

namespace {

// Linear energy-interpolation cell and offset, matching
// eval_spatial_energy_linear / BoundaryField::eval_energy.
void energy_lin(const PhaseGrid& grid, double E, int& k0, double& t) {
  const int nE = grid.n_energy();
  if (nE == 1) {
    k0 = 0;
    t = 0.0;
    return;
  }
  double u = (E - grid.E(0)) / grid.dE();
  u = std::clamp(u, 0.0, static_cast<double>(nE - 1));
  k0 = std::min(static_cast<int>(u), nE - 2);
  t = u - k0;
}

using Row = std::vector<std::pair<size_t, double>>;

// Row of the discrete P0^{-1} (tilted, conservative) at output node
// (s, ix, a, k): the same steps, gates and interpolation weights as the
// forward characteristic solve.
void p0inv_row(const Problem& p, int s, int ix, int a, int k, Row& row) {
  const PhaseGrid& grid = p.grid();
  const Vec3& x = grid.x(ix);
  const Vec3& w = grid.omega(a);
  const double hr =
      p.ray().h_ray > 0.0 ? p.ray().h_ray : p.domain().diameter() / 64.0;
  const double E = grid.E(k);
  SpatialWeight sw[8];
  if (!p.charged(s)) {
    const double tx = p.domain().exit_distance(x, -w);
    const int n = std::max(1, static_cast<int>(std::ceil(tx / hr)));
    const double dt = tx / n;
    int k0;
    double te;
    energy_lin(grid, E, k0, te);
    double att = 0.0;
    const auto Sg = p.sigma(s);
    for (int m = 0; m < n; ++m) {
      const Vec3 xm = x - w * ((m + 0.5) * dt);
      if (Sg) att += 0.5 * dt * Sg(xm, w, E);
      const double base = dt * std::exp(-att);
      const int cnt = spatial_weights(grid, xm, sw);
      for (int i = 0; i < cnt; ++i) {
        row.emplace_back(p.f().idx(s, sw[i].node, a, k0),
                         base * sw[i].w * (1 - te));
        if (te > 0.0)
          row.emplace_back(p.f().idx(s, sw[i].node, a, k0 + 1),
                           base * sw[i].w * te);
      }
      if (Sg) att += 0.5 * dt * Sg(xm, w, E);
    }
    return;
  }
  const EnergyMap& emap = p.emap(s);
  const auto& S = p.stopping()[s]->S;
  const double etaE = emap.R(E);
  const double s_max =
      std::min(emap.r_m() - etaE, p.domain().exit_distance(x, -w));
  if (s_max <= 0.0) return;
  const int n = std::max(1, static_cast<int>(std::ceil(s_max / hr)));
  const double ds = s_max / n;
  const auto Sg = p.sigma_xw(s);
  const double SE = S(E);
  double att = 0.0;
  for (int m = 0; m < n; ++m) {
    const double sm = (m + 0.5) * ds;
    const Vec3 xm = x - w * sm;
    if (Sg) att += 0.5 * ds * Sg(xm, w);
    const double Es = emap.R_inv(etaE + sm);
    const double tilt = p.C() != 0.0 ? std::exp(-p.C() * (Es - E)) : 1.0;
    const double base = ds * std::exp(-att) * tilt * S(Es) / SE;
    int k0;
    double te;
    energy_lin(grid, Es, k0, te);
    const int cnt = spatial_weights(grid, xm, sw);
    for (int i = 0; i < cnt; ++i) {
      row.emplace_back(p.f().idx(s, sw[i].node, a, k0),
                       base * sw[i].w * (1 - te));
      if (te > 0.0)
        row.emplace_back(p.f().idx(s, sw[i].node, a, k0 + 1),
                         base * sw[i].w * te);
    }
    if (Sg) att += 0.5 * ds * Sg(xm, w);
  }
}

// Row of the untilted primary lift L (f = 0) at (s, ix, a, k), with indices
// into the inflow BoundaryField data.
void lift_row(const Problem& p, const BoundaryField& gref, int s, int ix,
              int a, int k, Row& row) {
  const PhaseGrid& grid = p.grid();
  const Vec3& x = grid.x(ix);
  const Vec3& w = grid.omega(a);
  const double hr =
      p.ray().h_ray > 0.0 ? p.ray().h_ray : p.domain().diameter() / 64.0;
  const double E = grid.E(k);
  const double tx = p.domain().exit_distance(x, -w);
  const Vec3 y = x - w * tx;
  SurfaceWeight sw[4];
  if (!p.charged(s)) {
    double att = 0.0;
    if (const auto Sg = p.sigma(s)) {
      const int n = std::max(1, static_cast<int>(std::ceil(tx / hr)));
      const double dt = tx / n;
      for (int m = 0; m < n; ++m)
        att += dt * Sg(x - w * ((m + 0.5) * dt), w, E);
    }
    const double base = std::exp(-att);
    int k0;
    double te;
    energy_lin(grid, E, k0, te);
    const int cnt = surface_weights(gref, y, sw);
    for (int i = 0; i < cnt; ++i) {
      row.emplace_back(gref.idx(s, sw[i].node, a, k0),
                       base * sw[i].w * (1 - te));
      if (te > 0.0)
        row.emplace_back(gref.idx(s, sw[i].node, a, k0 + 1),
                         base * sw[i].w * te);
    }
    return;
  }
  const EnergyMap& emap = p.emap(s);
  const auto& S = p.stopping()[s]->S;
  const double etaE = emap.R(E);
  if (!(etaE + tx < emap.r_m())) return;  // Heaviside gate closed
  double att = 0.0;
  if (const auto Sg = p.sigma_xw(s)) {
    const int n = std::max(1, static_cast<int>(std::ceil(tx / hr)));
    const double dt = tx / n;
    for (int m = 0; m < n; ++m)
      att += dt * Sg(x - w * ((m + 0.5) * dt), w);
  }
  const double Eb = emap.R_inv(etaE + tx);
  const double base = std::exp(-att) * S(Eb) / S(E);
  int k0;
  double te;
  energy_lin(grid, Eb, k0, te);
  const int cnt = surface_weights(gref, y, sw);
  for (int i = 0; i < cnt; ++i) {
    row.emplace_back(gref.idx(s, sw[i].node, a, k0),
                     base * sw[i].w * (1 - te));
    if (te > 0.0)
      row.emplace_back(gref.idx(s, sw[i].node, a, k0 + 1),
                       base * sw[i].w * te);
  }
}

double field_W(const PhaseGrid& grid, int ix, int a, int k) {
  return grid.wx(ix) * grid.ww(a) * grid.wE(k);
}

// W-adjoint of P0^{-1}: scatter the output weights back along the rays.
Field p0inv_adjoint_W(const Problem& p, const Field& y) {
  const PhaseGrid& grid = p.grid();
  Field acc(grid);
  Row row;
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double yv = y.at(s, ix, a, k);
          if (yv == 0.0) continue;
          row.clear();
          p0inv_row(p, s, ix, a, k, row);
          const double Wo = field_W(grid, ix, a, k);
          for (const auto& [idx, c] : row) acc.data()[idx] += Wo * c * yv;
        }
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          acc.at(s, ix, a, k) /= field_W(grid, ix, a, k);
  return acc;
}

// W-adjoint of the lift: scatter volume weights onto the control nodes,
// normalized by the T2 boundary measure (masked nodes stay zero).
BoundaryField lift_adjoint_W(const Problem& p, const Field& y) {
  const PhaseGrid& grid = p.grid();
  BoundaryField acc(grid, Orientation::Inflow);
  Row row;
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double yv = y.at(s, ix, a, k);
          if (yv == 0.0) continue;
          row.clear();
          lift_row(p, acc, s, ix, a, k, row);
          const double Wo = field_W(grid, ix, a, k);
          for (const auto& [idx, c] : row) acc.data()[idx] += Wo * c * yv;
        }
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < acc.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a) {
        const double muw = acc.mu_weight(b, a);
        for (int k = 0; k < grid.n_energy(); ++k) {
          if (muw <= 0.0) {
            acc.at(s, b, a, k) = 0.0;
          } else {
            acc.at(s, b, a, k) /=
                acc.w_surf(b) * grid.ww(a) * muw * grid.wE(k);
          }
        }
      }
  return acc;
}

// Misfit trace representative: L*_W E_+ (I - Q*)^{-1} E_- D*(2 c_R (D - d)).
BoundaryField misfit_representative(Problem& p, const Prescription& pres,
                                    const BoundaryField& g,
                                    const DoseModel& dose_model,
                                    const SolveOptions& opts) {
  const PhaseGrid& grid = p.grid();
  p.set_boundary(g);
  SolveOptions fwd = opts;
  fwd.with_traces = false;
  const SolveResult sol = source_iteration(p, fwd);
  const std::vector<double> D = dose(dose_model, grid, sol.psi);
  std::vector<double> r(grid.n_spatial());
  for (int ix = 0; ix < grid.n_spatial(); ++ix)
    r[ix] = 2.0 * pres.region_weight(pres.region[ix]) *
            (D[ix] - pres.target[ix]);
  const Field yW = dose_adjoint(dose_model, grid, r);
  const Field yhat = exp_transform(grid, yW, p.C(), TiltDirection::Inverse);

  // z = (I - K* P*)^{-1} yhat by the transposed fixed-point iteration.
  Field z = yhat;
  double scale = std::max(l2_norm(grid, z), 1e-300);
  for (int it = 0; it < fwd.max_iter; ++it) {
    Field Pz = p0inv_adjoint_W(p, z);
    Field zn = p.applier_tilted().apply_adjoint(Pz);
    zn += yhat;
    Field diff = zn;
    diff -= z;
    const double resid = l2_norm(grid, diff);
    z = std::move(zn);
    if (resid <= fwd.tol * scale) break;
  }
  const Field zp = exp_transform(grid, z, p.C(), TiltDirection::Forward);
  return lift_adjoint_W(p, zp);
}

// Tridiagonal X-Riesz solve per (b, a) node for a charged species:
// (diag(wE) + A) v = wE * rep with v(last) = 0 pinned.
void riesz_energy_solve(const PhaseGrid& grid, const double* rep, double* v) {
  const int nE = grid.n_energy();
  const double wE = grid.dE(), idE = 1.0 / grid.dE();
  if (nE == 1) {
    v[0] = 0.0;  // the Em slice is constrained to zero
    return;
  }
  const int n = nE - 1;  // unknowns 0..nE-2, v[nE-1] = 0
  std::vector<double> a(n, -idE), b(n), c(n, -idE), d(n);
  for (int k = 0; k < n; ++k) {
    const double deg = (k == 0) ? 1.0 : 2.0;
    b[k] = wE + deg * idE;
    d[k] = wE * rep[k];
  }
  // (The row k = nE-2 keeps its -1/dE coupling to the pinned zero value.)
  for (int k = 1; k < n; ++k) {
    const double m = a[k] / b[k - 1];
    b[k] -= m * c[k - 1];
    d[k] -= m * d[k - 1];
  }
  v[n - 1] = d[n - 1] / b[n - 1];
  for (int k = n - 2; k >= 0; --k) v[k] = (d[k] - c[k] * v[k + 1]) / b[k];
  v[nE - 1] = 0.0;
}

}  // namespace

double control_inner_X(const Problem& p, const BoundaryField& ga,
                       const BoundaryField& gb) {
  const PhaseGrid& grid = p.grid();
  const int nE = grid.n_energy();
  double sum = 0.0;
  for (int s = 0; s < grid.species(); ++s) {
    const bool ch = p.charged(s);
    for (int b = 0; b < ga.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a) {
        const double muw = ga.mu_weight(b, a);
        if (muw <= 0.0) continue;
        const double wb = ga.w_surf(b) * grid.ww(a) * muw;
        double acc = 0.0;
        for (int k = 0; k < nE; ++k)
          acc += grid.wE(k) * ga.at(s, b, a, k) * gb.at(s, b, a, k);
        if (ch) {
          for (int k = 0; k + 1 < nE; ++k)
            acc += (ga.at(s, b, a, k + 1) - ga.at(s, b, a, k)) *
                   (gb.at(s, b, a, k + 1) - gb.at(s, b, a, k)) / grid.dE();
        }
        sum += wb * acc;
      }
  }
  return sum;
}

double control_norm_X(const Problem& p, const BoundaryField& g) {
  return std::sqrt(std::max(0.0, control_inner_X(p, g, g)));
}

double cost_J(Problem& p, const Prescription& pres, const BoundaryField& g,
              const DoseModel& dose_model, const SolveOptions& opts) {
  const PhaseGrid& grid = p.grid();
  if (static_cast<int>(pres.region.size()) != grid.n_spatial())
    throw std::invalid_argument("cost_J: region labels do not match grid");
  p.set_boundary(g);
  SolveOptions fwd = opts;
  fwd.with_traces = false;
  const SolveResult sol = source_iteration(p, fwd);
  const std::vector<double> D = dose(dose_model, grid, sol.psi);
  double J = 0.0;
  for (int ix = 0; ix < grid.n_spatial(); ++ix) {
    const double m = pres.target[ix] - D[ix];
    J += grid.wx(ix) * pres.region_weight(pres.region[ix]) * m * m;
  }
  return J + pres.creg * control_inner_X(p, g, g);
}

BoundaryField grad_J(Problem& p, const Prescription& pres,
                     const BoundaryField& g, const DoseModel& dose_model,
                     const SolveOptions& opts) {
  const PhaseGrid& grid = p.grid();
  const BoundaryField rep =
      misfit_representative(p, pres, g, dose_model, opts);
  BoundaryField grad(grid, Orientation::Inflow);
  const int nE = grid.n_energy();
  std::vector<double> repv(nE), v(nE);
  for (int s = 0; s < grid.species(); ++s) {
    const bool ch = p.charged(s);
    for (int b = 0; b < grad.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a) {
        if (!grad.active(b, a)) continue;
        if (!ch) {
          for (int k = 0; k < nE; ++k)
            grad.at(s, b, a, k) = rep.at(s, b, a, k) +
                                  2.0 * pres.creg * g.at(s, b, a, k);
        } else {
          for (int k = 0; k < nE; ++k) repv[k] = rep.at(s, b, a, k);
          riesz_energy_solve(grid, repv.data(), v.data());
          for (int k = 0; k < nE; ++k)
            grad.at(s, b, a, k) =
                v[k] + 2.0 * pres.creg * g.at(s, b, a, k);
          grad.at(s, b, a, nE - 1) = 0.0;
        }
      }
  }
  return grad;
}

BoundaryField project_admissible(const Problem& p, const BoundaryField& g) {
  const PhaseGrid& grid = p.grid();
  BoundaryField out = g;
  const int nE = grid.n_energy();
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < out.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < nE; ++k) {
          double v = out.at(s, b, a, k);
          if (!out.active(b, a)) v = 0.0;
          if (v < 0.0) v = 0.0;
          if (p.charged(s) && k == nE - 1) v = 0.0;
          out.at(s, b, a, k) = v;
        }
  return out;
}

std::pair<BoundaryField, OptimizeHistory> optimize(
    Problem& p, const Prescription& pres, const DoseModel& dose_model,
    const BoundaryField& g0, const OptimizeOptions& oopts,
    const SolveOptions& sopts) {
  OptimizeHistory hist;
  BoundaryField g = project_admissible(p, g0);
  double J = cost_J(p, pres, g, dose_model, sopts);
  hist.J.push_back(J);
  double step = oopts.step0;
  for (int outer = 0; outer < oopts.max_outer; ++outer) {
    const BoundaryField grad = grad_J(p, pres, g, dose_model, sopts);
    // Fixed-point residual of the variational inequality at unit step.
    BoundaryField trial = grad;
    trial *= -1.0;
    trial += g;
    BoundaryField proj = project_admissible(p, trial);
    BoundaryField diff = g;
    diff *= -1.0;
    diff += proj;  // proj - g
    diff *= -1.0;  // g - proj
    const double fp_res = control_norm_X(p, diff);
    hist.grad_norm.push_back(fp_res);
    if (fp_res <= oopts.tol) {
      hist.converged = true;
      break;
    }
    // Projected backtracking line search.
    double s = std::max(step * 2.0, oopts.step0);
    bool accepted = false;
    for (int bt = 0; bt < oopts.max_backtrack; ++bt) {
      BoundaryField cand = grad;
      cand *= -s;
      cand += g;
      cand = project_admissible(p, cand);
      BoundaryField dgc = g;
      dgc *= -1.0;
      dgc += cand;  // cand - g
      const double decrease = -control_inner_X(p, grad, dgc);
      const double Jc = cost_J(p, pres, cand, dose_model, sopts);
      if (Jc <= J - oopts.sigma * std::max(decrease, 0.0) && Jc < J) {
        g = std::move(cand);
        J = Jc;
        step = s;
        accepted = true;
        break;
      }
      s *= oopts.beta;
    }
    hist.J.push_back(J);
    hist.step.push_back(step);
    ++hist.iterations;
    if (!accepted) {
      hist.line_search_failure = true;
      break;
    }
  }
  p.set_boundary(g);
  return {g, hist};
}

double optimality_residual(Problem& p, const Prescription& pres,
                           const BoundaryField& g, const DoseModel& dose_model,
                           const SolveOptions& opts) {
  const BoundaryField grad = grad_J(p, pres, g, dose_model, opts);
  BoundaryField trial = grad;
  trial *= -1.0;
  trial += g;
  const BoundaryField proj = project_admissible(p, trial);
  BoundaryField diff = proj;
  diff *= -1.0;
  diff += g;  // g - proj
  return control_norm_X(p, diff);
}

BoundaryField mild_control_diagnostic(Problem& p, const Prescription& pres,
                                      const BoundaryField& g,
                                      const DoseModel& dose_model,
                                      const SolveOptions& opts) {
  const BoundaryField rep =
      misfit_representative(p, pres, g, dose_model, opts);
  BoundaryField out = rep;
  out *= -1.0 / (2.0 * pres.creg);
  return project_admissible(p, out);
}

}  // namespace csda
