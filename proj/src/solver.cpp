#include "csda/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "csda/parallel.hpp"

namespace csda {

double compute_C(const std::vector<std::optional<StoppingPower>>& stopping) {
  double C = 0.0;
  bool any = false;
  for (const auto& sp : stopping)
    if (sp) {
      if (!(sp->kappa > 0.0))
        throw std::invalid_argument("compute_C: kappa must be > 0");
      C = std::max(C, sp->C);
      any = true;
    }
  return any ? C : 0.0;
}

Field exp_transform(const PhaseGrid& grid, const Field& psi, double C,
                    TiltDirection dir) {
  Field out = psi;
  const double sign = dir == TiltDirection::Forward ? 1.0 : -1.0;
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          out.at(s, ix, a, k) *= std::exp(sign * C * grid.E(k));
  return out;
}

BoundaryField exp_transform(const PhaseGrid& grid, const BoundaryField& g,
                            double C, TiltDirection dir) {
  BoundaryField out = g;
  const double sign = dir == TiltDirection::Forward ? 1.0 : -1.0;
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < g.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          out.at(s, b, a, k) *= std::exp(sign * C * grid.E(k));
  return out;
}

VolData field_data(const PhaseGrid& grid, const Field& f, int s) {
  return [&grid, &f, s](const Vec3& x, int a, double E) {
    return eval_spatial_energy_linear(grid, f, s, x, a, E);
  };
}

BdryData boundary_data(const BoundaryField& g, int s) {
  return [&g, s](const Vec3& y, int a, double E) {
    return g.eval_energy(s, y, a, E);
  };
}

Problem::Problem(const Domain& domain, const PhaseGrid& grid,
                 ScatterData scatter, KernelSet kernels,
                 std::vector<std::optional<StoppingPower>> stopping, Field f,
                 BoundaryField g, RaySettings ray)
    : domain_(domain),
      grid_(grid),
      scatter_(std::move(scatter)),
      kernels_(std::move(kernels)),
      stopping_(std::move(stopping)),
      f_(std::move(f)),
      g_(std::move(g)),
      ray_(ray) {
  if (static_cast<int>(stopping_.size()) != grid_.species() ||
      static_cast<int>(scatter_.Sigma.size()) != grid_.species() ||
      kernels_.species != grid_.species())
    throw std::invalid_argument("problem: per-species data sizes disagree");
  C_ = compute_C(stopping_);
  emaps_.resize(grid_.species());
  for (int s = 0; s < grid_.species(); ++s) {
    if (!stopping_[s]) continue;
    emaps_[s] = EnergyMap(stopping_[s]->S, grid_.E0(), grid_.Em());
    // Charged species require energy-independent Sigma for the
    // characteristic solvers.
    if (scatter_.Sigma[s]) {
      const Vec3 p = grid_.x(0);
      const Vec3 w = grid_.omega(0);
      if (std::abs(scatter_.Sigma[s](p, w, grid_.E0()) -
                   scatter_.Sigma[s](p, w, grid_.Em())) > 1e-12)
        throw std::invalid_argument(
            "problem: charged-species Sigma must not depend on energy");
    }
    // Compatibility: the discrete Em slice of g must vanish.
    double gm = 0.0, gmax = 0.0;
    const int kl = grid_.n_energy() - 1;
    for (int b = 0; b < g_.n_surf(); ++b)
      for (int a = 0; a < grid_.n_angular(); ++a) {
        gm = std::max(gm, std::abs(g_.at(s, b, a, kl)));
        for (int k = 0; k < grid_.n_energy(); ++k)
          gmax = std::max(gmax, std::abs(g_.at(s, b, a, k)));
      }
    if (gm > 1e-12 * std::max(gmax, 1.0))
      throw std::invalid_argument(
          "problem: charged boundary data must vanish at the cutoff energy");
  }
  // Accretivity margin of the tilted system and the coercivity constant.
  c_ = accretivity_margin(scatter_, kernels_, C_, grid_);
  c_prime_ = std::min(0.5, c_);
  for (int s = 0; s < grid_.species(); ++s)
    if (stopping_[s]) c_prime_ = std::min(c_prime_, 0.5 * stopping_[s]->kappa);
  tilted_ = std::make_shared<KernelApplier>(tilt_kernels(kernels_, C_), grid_);
  plain_ = std::make_shared<KernelApplier>(kernels_, grid_);
}

XsFnXW Problem::sigma_xw(int s) const {
  if (!scatter_.Sigma[s]) return nullptr;
  auto fn = scatter_.Sigma[s];
  const double E0 = grid_.E0();
  return [fn, E0](const Vec3& x, const Vec3& w) { return fn(x, w, E0); };
}

void Problem::set_boundary(const BoundaryField& g) { g_ = g; }

Field primary_solution(const Problem& p, const Field& f,
                       const BoundaryField& g, CharMode mode) {
  const PhaseGrid& grid = p.grid();
  Field u(grid);
  for (int s = 0; s < grid.species(); ++s) {
    const VolData fd = field_data(grid, f, s);
    const BdryData gd = boundary_data(g, s);
    if (!p.charged(s)) {
      primary_photon(p.domain(), grid, p.sigma(s), fd, gd, u, s, p.ray());
    } else {
      primary_charged(p.domain(), grid, p.emap(s), p.stopping()[s]->S,
                      p.sigma_xw(s), 0.0, fd, gd, u, s, p.ray(), mode);
    }
  }
  return u;
}

namespace {

// P0^{-1} of a discrete (tilted) source field, per species.
Field p0_inverse_field(const Problem& p, const Field& z, CharMode mode) {
  const PhaseGrid& grid = p.grid();
  Field out(grid);
  for (int s = 0; s < grid.species(); ++s) {
    const VolData zd = field_data(grid, z, s);
    if (!p.charged(s)) {
      solve_inflow_source(p.domain(), grid, p.sigma(s), zd, out, s, p.ray());
    } else {
      apply_P0_inverse(p.domain(), grid, p.emap(s), p.stopping()[s]->S,
                       p.sigma_xw(s), p.C(), zd, out, s, p.ray(), mode);
    }
  }
  return out;
}

// Point value of P0^{-1} z at an arbitrary phase point (trace extraction).
double p0_inverse_point(const Problem& p, const Field& z, int s, const Vec3& x,
                        int a, double E, CharMode mode) {
  const VolData zd = field_data(p.grid(), z, s);
  if (!p.charged(s))
    return primary_photon_point(p.domain(), p.grid(), p.sigma(s), zd, nullptr,
                                x, a, E, p.ray());
  return primary_charged_point(p.domain(), p.grid(), p.emap(s),
                               p.stopping()[s]->S, p.sigma_xw(s), p.C(), zd,
                               nullptr, x, a, E, p.ray(), mode);
}

// Point value of the untilted primary solution (trace extraction).
double primary_point(const Problem& p, int s, const Vec3& x, int a, double E,
                     CharMode mode) {
  const VolData fd = field_data(p.grid(), p.f(), s);
  const BdryData gd = boundary_data(p.g(), s);
  if (!p.charged(s))
    return primary_photon_point(p.domain(), p.grid(), p.sigma(s), fd, gd, x,
                                a, E, p.ray());
  return primary_charged_point(p.domain(), p.grid(), p.emap(s),
                               p.stopping()[s]->S, p.sigma_xw(s), 0.0, fd, gd,
                               x, a, E, p.ray(), mode);
}

void extract_traces(const Problem& p, const Field& z_tilted, SolveResult& r,
                    CharMode mode) {
  const PhaseGrid& grid = p.grid();
  r.trace_plus = BoundaryField(grid, Orientation::Outflow);
  for (int s = 0; s < grid.species(); ++s)
    for (int b = 0; b < r.trace_plus.n_surf(); ++b)
      for (int a = 0; a < grid.n_angular(); ++a) {
        if (!r.trace_plus.active(b, a)) continue;
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double E = grid.E(k);
          double v = primary_point(p, s, r.trace_plus.y(b), a, E, mode);
          v += std::exp(-p.C() * E) *
               p0_inverse_point(p, z_tilted, s, r.trace_plus.y(b), a, E, mode);
          r.trace_plus.at(s, b, a, k) = v;
        }
      }
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  r.slice_E0.assign(static_cast<size_t>(grid.species()) * nx * nw, 0.0);
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        double v = primary_point(p, s, grid.x(ix), a, grid.E0(), mode);
        v += std::exp(-p.C() * grid.E0()) *
             p0_inverse_point(p, z_tilted, s, grid.x(ix), a, grid.E0(), mode);
        r.slice_E0[(static_cast<size_t>(s) * nx + ix) * nw + a] = v;
      }
}

double estimate_q_norm(const Problem& p, CharMode mode, uint64_t seed) {
  const PhaseGrid& grid = p.grid();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Field z(grid);
  for (double& v : z.data()) v = dist(rng);
  double nrm = l2_norm(grid, z);
  if (nrm == 0.0) return 0.0;
  z *= 1.0 / nrm;
  double rho = 0.0;
  for (int it = 0; it < 10; ++it) {
    Field Kz = p.applier_tilted().apply(z);
    Field Qz = p0_inverse_field(p, Kz, mode);
    rho = l2_norm(grid, Qz);
    if (rho == 0.0) break;
    Qz *= 1.0 / rho;
    z = Qz;
  }
  return rho;
}

}  // namespace

SolveResult source_iteration_impl(const Problem& p, const SolveOptions& opts,
                                  CharMode mode) {
  const PhaseGrid& grid = p.grid();
  SolveResult res;
  res.report.C = p.C();
  res.report.c = p.c();
  res.report.c_prime = p.c_prime();

  const Field u = primary_solution(p, p.f(), p.g(), mode);
  const Field u_C = exp_transform(grid, u, p.C(), TiltDirection::Forward);

  Field w(grid);
  Field phi = u_C;
  double scale = 0.0;
  int it = 0;
  int stagnant = 0;
  double prev_res = -1.0;
  for (it = 1; it <= opts.max_iter; ++it) {
    Field z = p.applier_tilted().apply(phi);
    Field w_next = p0_inverse_field(p, z, mode);
    Field diff = w_next;
    diff -= w;
    const double resid = l2_norm(grid, diff);
    res.report.residuals.push_back(resid);
    w = w_next;
    phi = u_C;
    phi += w;
    if (it == 1) scale = std::max(l2_norm(grid, phi), 1e-300);
    if (resid <= opts.tol * scale) {
      res.report.converged = true;
      break;
    }
    if (prev_res >= 0.0 && resid > 0.99 * prev_res) {
      if (++stagnant >= 10) break;
    } else {
      stagnant = 0;
    }
    prev_res = resid;
  }
  res.report.iterations = std::min(it, opts.max_iter);
  if (!res.report.converged) {
    // Report the measured contraction factor with the non-convergence.
    double ratio = -1.0;
    const auto& r = res.report.residuals;
    if (r.size() >= 2 && r[r.size() - 2] > 0.0)
      ratio = r.back() / r[r.size() - 2];
    res.report.contraction_estimate = ratio;
  }
  if (opts.estimate_contraction) {
    res.report.contraction_estimate = estimate_q_norm(p, mode, 12345);
    const SchurBounds sb = schur_bounds(p.kernels(), grid);
    res.report.M1 = sb.M1;
    res.report.M2 = sb.M2;
    res.report.norm_bound_checked = true;
  }
  res.psi = exp_transform(grid, phi, p.C(), TiltDirection::Inverse);
  if (opts.with_traces) {
    // Final source consistent with the returned iterate.
    const Field z_final = p.applier_tilted().apply(phi);
    extract_traces(p, z_final, res, mode);
    res.report.apriori_ratio = apriori_check(p, res);
  }
  return res;
}

SolveResult source_iteration(const Problem& p, const SolveOptions& opts) {
  return source_iteration_impl(p, opts, CharMode::Conservative);
}

SolveResult dense_oracle_solve(const Problem& p, int max_unknowns) {
  const PhaseGrid& grid = p.grid();
  const int64_t N = grid.total_size();
  if (N > max_unknowns)
    throw std::invalid_argument("dense oracle: unknown count exceeds guard");
  const Field u = primary_solution(p, p.f(), p.g(), CharMode::Conservative);
  const Field u_C = exp_transform(grid, u, p.C(), TiltDirection::Forward);

  const auto apply_Q = [&](const Field& in) {
    Field z = p.applier_tilted().apply(in);
    return p0_inverse_field(p, z, CharMode::Conservative);
  };

  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(N, N);
  Field probe(grid);
  for (int64_t col = 0; col < N; ++col) {
    std::fill(probe.data().begin(), probe.data().end(), 0.0);
    probe.data()[col] = 1.0;
    const Field Qe = apply_Q(probe);
    for (int64_t row = 0; row < N; ++row) M(row, col) -= Qe.data()[row];
  }
  const Field rhs_f = apply_Q(u_C);
  Eigen::VectorXd rhs(N);
  for (int64_t i = 0; i < N; ++i) rhs(i) = rhs_f.data()[i];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  Eigen::VectorXd wv = lu.solve(rhs);
  const double check = (M * wv - rhs).norm();
  if (!(check <= 1e-8 * std::max(1.0, rhs.norm())))
    throw std::runtime_error("dense oracle: singular or ill-posed system");

  SolveResult res;
  res.report.C = p.C();
  res.report.c = p.c();
  res.report.c_prime = p.c_prime();
  res.report.converged = true;
  res.report.iterations = 1;
  Field phi = u_C;
  for (int64_t i = 0; i < N; ++i) phi.data()[i] += wv(i);
  res.psi = exp_transform(grid, phi, p.C(), TiltDirection::Inverse);
  Field z_final = p.applier_tilted().apply(phi);
  extract_traces(p, z_final, res, CharMode::Conservative);
  res.report.apriori_ratio = apriori_check(p, res);
  return res;
}

SolveResult solve_coupled(const Problem& p, const SolveOptions& opts) {
  if (p.grid().species() != 3)
    throw std::invalid_argument("solve_coupled: needs species_count = 3");
  return source_iteration(p, opts);
}

// --- discrete derivative stencils ---------------------------------------

namespace {

// d/dE by central differences, one-sided at the interval ends.
double dE_stencil(const PhaseGrid& grid, const Field& f, int s, int ix, int a,
                  int k) {
  const int nE = grid.n_energy();
  const double h = grid.dE();
  if (nE == 1) return 0.0;
  if (k == 0) return (f.at(s, ix, a, 1) - f.at(s, ix, a, 0)) / h;
  if (k == nE - 1)
    return (f.at(s, ix, a, nE - 1) - f.at(s, ix, a, nE - 2)) / h;
  return (f.at(s, ix, a, k + 1) - f.at(s, ix, a, k - 1)) / (2 * h);
}

// w.grad by per-axis central differences on the masked lattice with
// one-sided closure where a neighbor is missing.
double omega_grad_stencil(const PhaseGrid& grid, const Field& f, int s, int ix,
                          int a, int k) {
  int ci, cj, ck;
  grid.spatial_coords(ix, ci, cj, ck);
  const double h = grid.hx();
  const Vec3& w = grid.omega(a);
  double acc = 0.0;
  const int c[3] = {ci, cj, ck};
  for (int d = 0; d < 3; ++d) {
    int ip[3] = {c[0], c[1], c[2]}, im[3] = {c[0], c[1], c[2]};
    ip[d] += 1;
    im[d] -= 1;
    const int np = grid.lattice_index(ip[0], ip[1], ip[2]);
    const int nm = grid.lattice_index(im[0], im[1], im[2]);
    double deriv = 0.0;
    if (np >= 0 && nm >= 0)
      deriv = (f.at(s, np, a, k) - f.at(s, nm, a, k)) / (2 * h);
    else if (np >= 0)
      deriv = (f.at(s, np, a, k) - f.at(s, ix, a, k)) / h;
    else if (nm >= 0)
      deriv = (f.at(s, ix, a, k) - f.at(s, nm, a, k)) / h;
    acc += w[d] * deriv;
  }
  return acc;
}

bool full_stencil(const PhaseGrid& grid, int ix, int k) {
  if (k == 0 || k == grid.n_energy() - 1) return false;
  int ci, cj, ck;
  grid.spatial_coords(ix, ci, cj, ck);
  const int c[3] = {ci, cj, ck};
  for (int d = 0; d < 3; ++d) {
    int ip[3] = {c[0], c[1], c[2]}, im[3] = {c[0], c[1], c[2]};
    ip[d] += 1;
    im[d] -= 1;
    if (grid.lattice_index(ip[0], ip[1], ip[2]) < 0 ||
        grid.lattice_index(im[0], im[1], im[2]) < 0)
      return false;
  }
  return true;
}

}  // namespace

double bilinear_B(const Problem& p, const TraceField& phi, const TraceField& v,
                  bool with_C) {
  const PhaseGrid& grid = p.grid();
  const double C = with_C ? p.C() : 0.0;
  const KernelApplier& ka = with_C ? p.applier_tilted() : p.applier();
  const Field Kv = ka.apply_adjoint(v.vol);
  double B = 0.0;
  for (int s = 0; s < grid.species(); ++s) {
    const bool ch = p.charged(s);
    const auto S = ch ? p.stopping()[s]->S : nullptr;
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double wq = grid.wx(ix) * grid.ww(a) * grid.wE(k);
          const double ph = phi.vol.at(s, ix, a, k);
          double term = -omega_grad_stencil(grid, v.vol, s, ix, a, k);
          if (ch) {
            const double SE = S(grid.E(k));
            term += SE * dE_stencil(grid, v.vol, s, ix, a, k);
            term += C * SE * v.vol.at(s, ix, a, k);
          }
          const double sg =
              p.sigma(s) ? p.sigma(s)(grid.x(ix), grid.omega(a), grid.E(k))
                         : 0.0;
          term += sg * v.vol.at(s, ix, a, k) - Kv.at(s, ix, a, k);
          B += wq * ph * term;
        }
  }
  B += t2_boundary_inner(phi.trace_plus, v.trace_plus, false);
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  for (int s = 0; s < grid.species(); ++s) {
    if (!p.charged(s)) continue;
    const double S0 = p.stopping()[s]->S(grid.E0());
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        const size_t id = (static_cast<size_t>(s) * nx + ix) * nw + a;
        B += grid.wx(ix) * grid.ww(a) * S0 * phi.slice_E0[id] *
             v.slice_E0[id];
      }
  }
  return B;
}

double bilinear_B_adjoint(const Problem& p, const TraceField& ps,
                          const TraceField& v) {
  const PhaseGrid& grid = p.grid();
  const Field Kv = p.applier().apply(v.vol);
  double B = 0.0;
  for (int s = 0; s < grid.species(); ++s) {
    const bool ch = p.charged(s);
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double wq = grid.wx(ix) * grid.ww(a) * grid.wE(k);
          const double pv = ps.vol.at(s, ix, a, k);
          double term = omega_grad_stencil(grid, v.vol, s, ix, a, k);
          if (ch) {
            // -d(S v)/dE via the product stencil around node k.
            const auto& S = p.stopping()[s]->S;
            const int nE = grid.n_energy();
            const double h = grid.dE();
            double d;
            if (k == 0)
              d = (S(grid.E(1)) * v.vol.at(s, ix, a, 1) -
                   S(grid.E(0)) * v.vol.at(s, ix, a, 0)) /
                  h;
            else if (k == nE - 1)
              d = (S(grid.E(nE - 1)) * v.vol.at(s, ix, a, nE - 1) -
                   S(grid.E(nE - 2)) * v.vol.at(s, ix, a, nE - 2)) /
                  h;
            else
              d = (S(grid.E(k + 1)) * v.vol.at(s, ix, a, k + 1) -
                   S(grid.E(k - 1)) * v.vol.at(s, ix, a, k - 1)) /
                  (2 * h);
            term -= d;
          }
          const double sg =
              p.sigma(s) ? p.sigma(s)(grid.x(ix), grid.omega(a), grid.E(k))
                         : 0.0;
          term += sg * v.vol.at(s, ix, a, k) - Kv.at(s, ix, a, k);
          B += wq * pv * term;
        }
  }
  B += t2_boundary_inner(ps.trace_minus, v.trace_minus, false);
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  for (int s = 0; s < grid.species(); ++s) {
    if (!p.charged(s)) continue;
    const double Sm = p.stopping()[s]->S(grid.Em());
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        const size_t id = (static_cast<size_t>(s) * nx + ix) * nw + a;
        B += grid.wx(ix) * grid.ww(a) * Sm * ps.slice_Em[id] *
             v.slice_Em[id];
      }
  }
  return B;
}

double green_residual(const Problem& p, const TraceField& phi,
                      const TraceField& v) {
  const PhaseGrid& grid = p.grid();
  double lhs = 0.0;
  for (int s = 0; s < grid.species(); ++s) {
    const bool ch = p.charged(s);
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double wq = grid.wx(ix) * grid.ww(a) * grid.wE(k);
          double Pphi = omega_grad_stencil(grid, phi.vol, s, ix, a, k);
          double Ppv = -omega_grad_stencil(grid, v.vol, s, ix, a, k);
          if (ch) {
            const auto& S = p.stopping()[s]->S;
            const int nE = grid.n_energy();
            const double h = grid.dE();
            const auto dSprod = [&](const Field& f) {
              if (k == 0)
                return (S(grid.E(1)) * f.at(s, ix, a, 1) -
                        S(grid.E(0)) * f.at(s, ix, a, 0)) /
                       h;
              if (k == nE - 1)
                return (S(grid.E(nE - 1)) * f.at(s, ix, a, nE - 1) -
                        S(grid.E(nE - 2)) * f.at(s, ix, a, nE - 2)) /
                       h;
              return (S(grid.E(k + 1)) * f.at(s, ix, a, k + 1) -
                      S(grid.E(k - 1)) * f.at(s, ix, a, k - 1)) /
                     (2 * h);
            };
            Pphi -= dSprod(phi.vol);
            Ppv += S(grid.E(k)) * dE_stencil(grid, v.vol, s, ix, a, k);
          }
          lhs += wq * (Pphi * v.vol.at(s, ix, a, k) -
                       Ppv * phi.vol.at(s, ix, a, k));
        }
  }
  double rhs = t2_boundary_inner(phi.trace_plus, v.trace_plus, false) -
               t2_boundary_inner(phi.trace_minus, v.trace_minus, false);
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  for (int s = 0; s < grid.species(); ++s) {
    if (!p.charged(s)) continue;
    const double S0 = p.stopping()[s]->S(grid.E0());
    const double Sm = p.stopping()[s]->S(grid.Em());
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        const size_t id = (static_cast<size_t>(s) * nx + ix) * nw + a;
        rhs += grid.wx(ix) * grid.ww(a) *
               (S0 * phi.slice_E0[id] * v.slice_E0[id] -
                Sm * phi.slice_Em[id] * v.slice_Em[id]);
      }
  }
  return std::abs(lhs - rhs);
}

double transport_residual(const Problem& p, const Field& psi,
                          const Field& rhs) {
  const PhaseGrid& grid = p.grid();
  double sum = 0.0, wsum = 0.0;
  for (int s = 0; s < grid.species(); ++s) {
    const bool ch = p.charged(s);
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          if (!full_stencil(grid, ix, k)) continue;
          if (ch) {
            // Skip nodes whose stencil straddles the characteristic gate
            // min{r_m - R(E), t(x,w)} (the solution kinks there).
            const double margin =
                2.0 * (grid.hx() + grid.dE() / p.stopping()[s]->kappa);
            const double gate = p.emap(s).r_m() - p.emap(s).R(grid.E(k));
            const double t =
                p.domain().exit_distance(grid.x(ix), -grid.omega(a));
            if (std::abs(gate - t) < margin) continue;
          }
          double r = omega_grad_stencil(grid, psi, s, ix, a, k);
          if (ch) {
            const auto& S = p.stopping()[s]->S;
            const double h = grid.dE();
            r -= (S(grid.E(k + 1)) * psi.at(s, ix, a, k + 1) -
                  S(grid.E(k - 1)) * psi.at(s, ix, a, k - 1)) /
                 (2 * h);
          }
          const double sg =
              p.sigma(s) ? p.sigma(s)(grid.x(ix), grid.omega(a), grid.E(k))
                         : 0.0;
          r += sg * psi.at(s, ix, a, k) - rhs.at(s, ix, a, k);
          const double wq = grid.wx(ix) * grid.ww(a) * grid.wE(k);
          sum += wq * r * r;
          wsum += wq;
        }
  }
  return wsum > 0 ? std::sqrt(sum / wsum) : 0.0;
}

double apriori_check(const Problem& p, const SolveResult& sol) {
  if (!(p.c_prime() > 0.0)) return -1.0;
  const PhaseGrid& grid = p.grid();
  // |psi|_H: L2 + T2 traces for every species, E-endpoint slices for the
  // charged ones (Em slice vanishes by construction).
  double nsq = 0.0;
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          nsq += grid.wx(ix) * grid.ww(a) * grid.wE(k) *
                 sol.psi.at(s, ix, a, k) * sol.psi.at(s, ix, a, k);
  nsq += t2_boundary_inner(p.g(), p.g(), false);
  nsq += t2_boundary_inner(sol.trace_plus, sol.trace_plus, false);
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  for (int s = 0; s < grid.species(); ++s) {
    if (!p.charged(s)) continue;
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        const double v =
            sol.slice_E0[(static_cast<size_t>(s) * nx + ix) * nw + a];
        nsq += grid.wx(ix) * grid.ww(a) * v * v;
      }
  }
  const double lhs = std::sqrt(std::max(0.0, nsq));
  const double data = l2_norm(grid, p.f()) + t2_boundary_norm(p.g(), false);
  if (data == 0.0) return lhs == 0.0 ? 0.0 : -1.0;
  const double bound = std::exp(p.C() * grid.Em()) / p.c_prime() * data;
  return lhs / bound;
}

}  // namespace csda
