#include "csda/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csda/parallel.hpp"

namespace csda {

Field semigroup_A0(const Domain& domain, const PhaseGrid& grid, double t,
                   const Field& f) {
  if (t < 0.0) throw std::invalid_argument("semigroup_A0: t must be >= 0");
  Field out(grid);
  if (t == 0.0) return f;
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    const Vec3& x = grid.x(ix);
    for (int s = 0; s < grid.species(); ++s)
      for (int a = 0; a < grid.n_angular(); ++a) {
        if (domain.exit_distance(x, -grid.omega(a)) <= t) continue;
        const Vec3 xm = x - grid.omega(a) * t;
        for (int k = 0; k < grid.n_energy(); ++k)
          out.at(s, ix, a, k) = eval_spatial(grid, f, s, xm, a, k);
      }
  });
  return out;
}

namespace {
// Local Fritsch-Carlson cubic along the energy axis of a single node row.
double energy_interp_row(const PhaseGrid& grid, const Field& f, int s, int ix,
                         int a, double E) {
  const int nE = grid.n_energy();
  if (nE == 1) return f.at(s, ix, a, 0);
  const double h = grid.dE();
  double u = (E - grid.E(0)) / h;
  u = std::clamp(u, 0.0, static_cast<double>(nE - 1));
  const int k0 = std::min(static_cast<int>(u), nE - 2);
  const double t = u - k0;
  const auto val = [&](int k) {
    return f.at(s, ix, a, std::clamp(k, 0, nE - 1));
  };
  const auto slope = [&](int k) {
    if (k == 0) return (val(1) - val(0)) / h;
    if (k == nE - 1) return (val(nE - 1) - val(nE - 2)) / h;
    const double dl = (val(k) - val(k - 1)) / h;
    const double dr = (val(k + 1) - val(k)) / h;
    if (dl * dr <= 0.0) return 0.0;
    const double m = 0.5 * (dl + dr);
    const double lim = 3.0 * std::min(std::abs(dl), std::abs(dr));
    return std::copysign(std::min(std::abs(m), lim), m);
  };
  const double y0 = val(k0), y1 = val(k0 + 1);
  const double m0 = slope(k0), m1 = slope(k0 + 1);
  const double t2 = t * t, t3 = t2 * t;
  double v = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 +
             (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
  if (v < 0.0 && v > -1e-12) v = 0.0;
  return v;
}
}  // namespace

Field semigroup_B0(const PhaseGrid& grid,
                   const std::function<double(const Vec3&, double)>& S,
                   double t, const Field& f) {
  if (t < 0.0) throw std::invalid_argument("semigroup_B0: t must be >= 0");
  Field out(grid);
  if (t == 0.0) return f;
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    const Vec3& x = grid.x(ix);
    const EnergyMap emap([&](double E) { return S(x, E); }, grid.E0(),
                         grid.Em());
    for (int k = 0; k < grid.n_energy(); ++k) {
      const double gate = emap.r_m() - emap.R(grid.E(k));
      if (gate <= t) continue;
      const double Et = emap.R_inv(emap.R(grid.E(k)) + t);
      const double ratio = S(x, Et) / S(x, grid.E(k));
      for (int s = 0; s < grid.species(); ++s)
        for (int a = 0; a < grid.n_angular(); ++a)
          out.at(s, ix, a, k) =
              ratio * energy_interp_row(grid, f, s, ix, a, Et);
    }
  });
  return out;
}

Field semigroup_mult(const PhaseGrid& grid,
                     const std::function<double(const Vec3&, const Vec3&,
                                                double)>& a,
                     double t, const Field& f) {
  if (t < 0.0) throw std::invalid_argument("semigroup_mult: t must be >= 0");
  Field out = f;
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    for (int s = 0; s < grid.species(); ++s)
      for (int w = 0; w < grid.n_angular(); ++w)
        for (int k = 0; k < grid.n_energy(); ++k)
          out.at(s, ix, w, k) *=
              std::exp(-t * a(grid.x(ix), grid.omega(w), grid.E(k)));
  });
  return out;
}

SemigroupKResult semigroup_K(const KernelApplier& K, double t, const Field& f,
                             int N0) {
  SemigroupKResult r;
  r.value = f;
  Field term = f;
  double tnorm_est = 0.0;
  double prev = l2_norm(K.grid(), term);
  for (int k = 1; k <= N0; ++k) {
    Field Kt = K.apply(term);
    Kt *= t / k;
    term = std::move(Kt);
    r.value += term;
    const double cur = l2_norm(K.grid(), term);
    if (prev > 0.0) tnorm_est = std::max(tnorm_est, cur / prev * k);
    prev = cur;
  }
  r.tail_estimate = prev * tnorm_est / (N0 + 1);
  r.truncation_warning = tnorm_est > 5.0;
  return r;
}

namespace {

// One Trotter product step applied in the order B0, A0, mult, K.
Field trotter_product(const Problem& p, const SplitConfig& cfg, double t,
                      const Field& f) {
  const PhaseGrid& grid = p.grid();
  const double dt = t / cfg.n_split;
  const int s0 = 0;
  const auto& S = p.stopping()[s0]->S;
  const auto Sfun = [&S](const Vec3&, double E) { return S(E); };
  const double C = p.C();
  const auto decay = [&](const Vec3& x, const Vec3& w, double E) {
    const double sg = p.sigma(s0) ? p.sigma(s0)(x, w, E) : 0.0;
    return sg + C * S(E);
  };
  Field u = f;
  for (int m = 0; m < cfg.n_split; ++m) {
    u = semigroup_K(p.applier_tilted(), dt, u, cfg.K_taylor_terms).value;
    u = semigroup_mult(grid, decay, dt, u);
    u = semigroup_A0(p.domain(), grid, dt, u);
    u = semigroup_B0(grid, Sfun, dt, u);
  }
  return u;
}

}  // namespace

Field trotter_resolvent_solve(const Problem& p, const SplitConfig& cfg) {
  const PhaseGrid& grid = p.grid();
  if (grid.species() != 1 || !p.charged(0))
    throw std::invalid_argument(
        "trotter solve: single charged species only");
  if (!(p.c() > 0.0))
    throw std::invalid_argument(
        "trotter solve: needs accretivity margin c > 0");

  // Lift subtraction: f_tilde = f_C - T_C(L g_C), with w.grad(Lg) = 0.
  const BoundaryField gC =
      exp_transform(grid, p.g(), p.C(), TiltDirection::Forward);
  Field Lg(grid);
  lift_minus(p.domain(), grid, nullptr, boundary_data(gC, 0), Lg, 0, p.ray());
  Field ftilde = exp_transform(grid, p.f(), p.C(), TiltDirection::Forward);
  const auto& S = p.stopping()[0]->S;
  const double hE = 0.5 * grid.dE();
  const Field KLg = p.applier_tilted().apply(Lg);
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    const Vec3& x = grid.x(ix);
    for (int a = 0; a < grid.n_angular(); ++a) {
      const Vec3 y = x - grid.omega(a) * p.domain().exit_distance(
                                             x, -grid.omega(a));
      for (int k = 0; k < grid.n_energy(); ++k) {
        const double E = grid.E(k);
        const double El = std::max(grid.E0(), E - hE);
        const double Er = std::min(grid.Em(), E + hE);
        const double dSLg = (S(Er) * gC.eval_energy(0, y, a, Er) -
                             S(El) * gC.eval_energy(0, y, a, El)) /
                            (Er - El);
        const double sg =
            p.sigma(0) ? p.sigma(0)(x, grid.omega(a), E) : 0.0;
        const double TLg = -dSLg + (sg + p.C() * S(E)) * Lg.at(0, ix, a, k) -
                           KLg.at(0, ix, a, k);
        ftilde.at(0, ix, a, k) -= TLg;
      }
    }
  });

  // The A0 gate kills G(t) past the longest chord and the B0 gate past
  // r_m, so the infinite time integral truncates exactly there (T_max only
  // matters when it is smaller).
  const double t_kill =
      std::min(p.domain().diameter(), p.emap(0).r_m()) * (1.0 + 1e-12);
  const double T = std::min(cfg.T_max, t_kill);
  int n_t = cfg.n_t;
  if (n_t % 2 == 1) ++n_t;
  const double dt = T / n_t;
  Field integral(grid);
  for (int i = 0; i <= n_t; ++i) {
    const double t = i * dt;
    Field Gt = (i == 0) ? ftilde : trotter_product(p, cfg, t, ftilde);
    const double w = (i == 0 || i == n_t) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    Gt *= w * dt / 3.0;
    integral += Gt;
  }
  (void)t_kill;
  integral += Lg;
  return exp_transform(grid, integral, p.C(), TiltDirection::Inverse);
}

}  // namespace csda
