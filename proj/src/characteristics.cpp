#include "csda/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csda/parallel.hpp"

namespace csda {

StoppingPower StoppingPower::from_function(std::function<double(double)> S,
                                           double E0, double Em) {
  StoppingPower sp;
  const int n = 512;
  const double h = (Em - E0) / n;
  double kappa = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double E = E0 + i * h;
    kappa = std::min(kappa, S(E));
    const double el = std::max(E0, E - 0.5 * h);
    const double er = std::min(Em, E + 0.5 * h);
    dmax = std::max(dmax, (S(er) - S(el)) / (er - el));
  }
  if (!(kappa > 0.0))
    throw std::invalid_argument("stopping power: kappa = inf S must be > 0");
  sp.S = std::move(S);
  sp.kappa = kappa;
  sp.q = 0.5 * dmax;
  sp.C = std::max(sp.q, 0.0) / kappa;
  return sp;
}

namespace {
// Fritsch-Carlson slopes for monotone data on a uniform grid.
std::vector<double> pchip_slopes(const std::vector<double>& y, double h) {
  const int n = static_cast<int>(y.size());
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (y[1] - y[0]) / h;
  d[n - 1] = (y[n - 1] - y[n - 2]) / h;
  for (int k = 1; k < n - 1; ++k) {
    const double dl = (y[k] - y[k - 1]) / h;
    const double dr = (y[k + 1] - y[k]) / h;
    if (dl * dr <= 0.0) {
      d[k] = 0.0;
    } else {
      const double m = 0.5 * (dl + dr);
      const double lim = 3.0 * std::min(std::abs(dl), std::abs(dr));
      d[k] = std::copysign(std::min(std::abs(m), lim), m);
    }
  }
  return d;
}

double pchip_eval(const std::vector<double>& y, const std::vector<double>& d,
                  double x0, double h, double x) {
  const int n = static_cast<int>(y.size());
  double u = (x - x0) / h;
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  const int k = std::min(static_cast<int>(u), n - 2);
  const double t = u - k;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y[k] + (t3 - 2 * t2 + t) * h * d[k] +
         (-2 * t3 + 3 * t2) * y[k + 1] + (t3 - t2) * h * d[k + 1];
}

constexpr int kEnergySamples = 1024;
}  // namespace

EnergyMap::EnergyMap(const std::function<double(double)>& S, double E0,
                     double Em)
    : E0_(E0), Em_(Em) {
  const int n = kEnergySamples;
  h_ = (Em - E0) / n;
  eta_.assign(n + 1, 0.0);
  // Cumulative Gauss-Legendre (4-point) of 1/S over each energy cell.
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461,
                               0.6521451548625461, 0.3478548451374538};
  for (int i = 0; i < n; ++i) {
    const double a = E0 + i * h_;
    double cell = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double E = a + 0.5 * h_ * (1.0 + gx[q]);
      const double s = S(E);
      if (!(s > 0.0))
        throw std::invalid_argument("energy map: S must stay positive");
      cell += gw[q] / s;
    }
    eta_[i + 1] = eta_[i] + 0.5 * h_ * cell;
  }
  r_m_ = eta_.back();
  slope_ = pchip_slopes(eta_, h_);
}

double EnergyMap::R(double E) const {
  return pchip_eval(eta_, slope_, E0_, h_, E);
}

double EnergyMap::R_inv(double eta) const {
  if (eta <= 0.0) return E0_;
  if (eta >= r_m_) return Em_;
  // Monotone lookup for the initial guess, then safeguarded Newton.
  int lo = 0, hi = static_cast<int>(eta_.size()) - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (eta_[mid] <= eta ? lo : hi) = mid;
  }
  double El = E0_ + lo * h_, Eh = E0_ + hi * h_;
  double E = El + (eta - eta_[lo]) / std::max(eta_[hi] - eta_[lo], 1e-300) *
                      (Eh - El);
  const int n = static_cast<int>(eta_.size());
  const double ftol = 1e-14 * std::max(1.0, r_m_);
  for (int it = 0; it < 8; ++it) {
    const double f = R(E) - eta;
    if (std::abs(f) <= ftol) break;
    if (f > 0)
      Eh = E;
    else
      El = E;
    // dR/dE = 1/S, read off the sampled slope table.
    const double u =
        std::clamp((E - E0_) / h_, 0.0, static_cast<double>(n - 1));
    const int k = std::min(static_cast<int>(u), n - 2);
    const double t = u - k;
    const double dR = (1 - t) * slope_[k] + t * slope_[k + 1];
    double En = E - f / std::max(dR, 1e-300);
    if (!(En > El) || !(En > E0_) || !(En < Eh))
      En = 0.5 * (El + Eh);
    E = En;
  }
  return E;
}

namespace {

double default_hray(const Domain& d, const RaySettings& rs) {
  return rs.h_ray > 0.0 ? rs.h_ray : d.diameter() / 64.0;
}

}  // namespace

void lift_minus(const Domain& domain, const PhaseGrid& grid, const XsFn& Sigma,
                const BdryData& g, Field& out, int s, RaySettings rs) {
  const double h = default_hray(domain, rs);
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    const Vec3& x = grid.x(ix);
    for (int a = 0; a < grid.n_angular(); ++a) {
      const Vec3& w = grid.omega(a);
      const double t = domain.exit_distance(x, -w);
      const Vec3 y = x - w * t;
      for (int k = 0; k < grid.n_energy(); ++k) {
        const double E = grid.E(k);
        double att = 0.0;
        if (Sigma) {
          const int n = std::max(1, static_cast<int>(std::ceil(t / h)));
          const double dt = t / n;
          for (int m = 0; m < n; ++m)
            att += Sigma(x - w * ((m + 0.5) * dt), w, E);
          att *= dt;
        }
        out.at(s, ix, a, k) = std::exp(-att) * g(y, a, E);
      }
    }
  });
}

void lift_adjoint(const Domain& domain, const PhaseGrid& grid, const Field& w,
                  int s, BoundaryField& out, RaySettings rs) {
  if (out.orientation() != Orientation::Inflow)
    throw std::invalid_argument("lift_adjoint: needs an inflow field");
  const double h = default_hray(domain, rs);
  for (int b = 0; b < out.n_surf(); ++b)
    for (int a = 0; a < grid.n_angular(); ++a) {
      if (!out.active(b, a)) continue;
      const double tau = out.tau(b, a);
      const int n = std::max(1, static_cast<int>(std::ceil(tau / h)));
      const double dt = tau / n;
      const Vec3& dir = grid.omega(a);
      for (int k = 0; k < grid.n_energy(); ++k) {
        double acc = 0.0;
        for (int m = 0; m < n; ++m)
          acc += eval_spatial(grid, w, s, out.y(b) + dir * ((m + 0.5) * dt),
                              a, k);
        out.at(s, b, a, k) = acc * dt / tau;
      }
    }
}

void solve_inflow_source(const Domain& domain, const PhaseGrid& grid,
                         const XsFn& Sigma, const VolData& f, Field& out,
                         int s, RaySettings rs) {
  const double h = default_hray(domain, rs);
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    const Vec3& x = grid.x(ix);
    for (int a = 0; a < grid.n_angular(); ++a) {
      const Vec3& w = grid.omega(a);
      const double tx = domain.exit_distance(x, -w);
      const int n = std::max(1, static_cast<int>(std::ceil(tx / h)));
      const double dt = tx / n;
      for (int k = 0; k < grid.n_energy(); ++k) {
        const double E = grid.E(k);
        double acc = 0.0, att = 0.0;
        for (int m = 0; m < n; ++m) {
          const Vec3 xm = x - w * ((m + 0.5) * dt);
          if (Sigma) att += 0.5 * dt * Sigma(xm, w, E);
          acc += std::exp(-att) * f(xm, a, E);
          if (Sigma) att += 0.5 * dt * Sigma(xm, w, E);
        }
        out.at(s, ix, a, k) = acc * dt;
      }
    }
  });
}

void primary_photon(const Domain& domain, const PhaseGrid& grid,
                    const XsFn& Sigma, const VolData& f, const BdryData& g,
                    Field& out, int s, RaySettings rs) {
  Field lift(grid);
  if (g) lift_minus(domain, grid, Sigma, g, lift, s, rs);
  if (f)
    solve_inflow_source(domain, grid, Sigma, f, out, s, rs);
  if (g)
    for (size_t i = 0; i < out.data().size(); ++i)
      out.data()[i] += lift.data()[i];
}

double primary_photon_point(const Domain& domain, const PhaseGrid& grid,
                            const XsFn& Sigma, const VolData& f,
                            const BdryData& g, const Vec3& x, int a, double E,
                            RaySettings rs) {
  const double h = default_hray(domain, rs);
  const Vec3& w = grid.omega(a);
  const double tx = domain.exit_distance(x, -w);
  const int n = std::max(1, static_cast<int>(std::ceil(tx / h)));
  const double dt = tx / n;
  double acc = 0.0, att = 0.0;
  for (int m = 0; m < n; ++m) {
    const Vec3 xm = x - w * ((m + 0.5) * dt);
    if (Sigma) att += 0.5 * dt * Sigma(xm, w, E);
    if (f) acc += std::exp(-att) * f(xm, a, E);
    if (Sigma) att += 0.5 * dt * Sigma(xm, w, E);
  }
  double val = acc * dt;
  if (g) val += std::exp(-att) * g(x - w * tx, a, E);
  return val;
}

namespace {

// Shared kernel of the charged-species characteristic solves: the ray/energy
// integral of h plus (optionally) the gated boundary lift, at a single
// phase point.
double charged_point(const Domain& domain, const PhaseGrid& grid,
                     const EnergyMap& emap,
                     const std::function<double(double)>& S,
                     const XsFnXW& Sigma, double C, const VolData& h,
                     const BdryData& g, const Vec3& x, int a, double E,
                     double h_ray, CharMode mode) {
  const Vec3& w = grid.omega(a);
  const double tx = domain.exit_distance(x, -w);
  const double etaE = emap.R(E);
  const double s_gate = emap.r_m() - etaE;
  const double SE = S(E);
  double value = 0.0;

  if (h) {
    const double s_max = std::min(s_gate, tx);
    if (s_max > 0.0) {
      const int n =
          std::max(1, static_cast<int>(std::ceil(s_max / h_ray)));
      const double ds = s_max / n;
      double att = 0.0;  // int_0^s Sigma along the ray, accumulated midpoint
      double acc = 0.0;
      for (int m = 0; m < n; ++m) {
        const double sm = (m + 0.5) * ds;
        const Vec3 xm = x - w * sm;
        if (Sigma) att += 0.5 * ds * Sigma(xm, w);
        const double Es = emap.R_inv(etaE + sm);
        // Exponential tilt folds in exactly: int C S(E(tau)) dtau = C (E(s)-E).
        const double tilt = C != 0.0 ? std::exp(-C * (Es - E)) : 1.0;
        const double density =
            mode == CharMode::Conservative ? S(Es) / SE : 1.0;
        acc += std::exp(-att) * tilt * density * h(xm, a, Es);
        if (Sigma) att += 0.5 * ds * Sigma(xm, w);
      }
      value += acc * ds;
    }
  }

  if (g && etaE + tx < emap.r_m()) {
    double att = 0.0;
    if (Sigma) {
      const int n = std::max(1, static_cast<int>(std::ceil(tx / h_ray)));
      const double dt = tx / n;
      for (int m = 0; m < n; ++m)
        att += Sigma(x - w * ((m + 0.5) * dt), w) * dt;
    }
    const double Eb = emap.R_inv(etaE + tx);
    const double tilt = C != 0.0 ? std::exp(-C * (Eb - E)) : 1.0;
    const double density = mode == CharMode::Conservative ? S(Eb) / SE : 1.0;
    value += std::exp(-att) * tilt * density * g(x - w * tx, a, Eb);
  }
  return value;
}

}  // namespace

void apply_P0_inverse(const Domain& domain, const PhaseGrid& grid,
                      const EnergyMap& emap,
                      const std::function<double(double)>& S,
                      const XsFnXW& Sigma, double C, const VolData& h,
                      Field& out, int s, RaySettings rs, CharMode mode) {
  const double hr = default_hray(domain, rs);
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    for (int a = 0; a < grid.n_angular(); ++a)
      for (int k = 0; k < grid.n_energy(); ++k)
        out.at(s, ix, a, k) =
            charged_point(domain, grid, emap, S, Sigma, C, h, nullptr,
                          grid.x(ix), a, grid.E(k), hr, mode);
  });
}

void primary_charged(const Domain& domain, const PhaseGrid& grid,
                     const EnergyMap& emap,
                     const std::function<double(double)>& S,
                     const XsFnXW& Sigma, double C, const VolData& f,
                     const BdryData& g, Field& out, int s, RaySettings rs,
                     CharMode mode) {
  const double hr = default_hray(domain, rs);
  if (g) {
    // Compatibility g(.,.,Em) = 0 probed along a few boundary rays.
    const Vec3 probe = grid.x(grid.n_spatial() / 2);
    for (int a = 0; a < std::min(8, grid.n_angular()); ++a) {
      const Vec3 y =
          probe - grid.omega(a) * domain.exit_distance(probe, -grid.omega(a));
      if (std::abs(g(y, a, grid.Em())) > 1e-12)
        throw std::invalid_argument(
            "primary_charged: boundary data must vanish at Em");
    }
  }
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    for (int a = 0; a < grid.n_angular(); ++a)
      for (int k = 0; k < grid.n_energy(); ++k)
        out.at(s, ix, a, k) =
            charged_point(domain, grid, emap, S, Sigma, C, f, g, grid.x(ix),
                          a, grid.E(k), hr, mode);
  });
}

double primary_charged_point(const Domain& domain, const PhaseGrid& grid,
                             const EnergyMap& emap,
                             const std::function<double(double)>& S,
                             const XsFnXW& Sigma, double C, const VolData& f,
                             const BdryData& g, const Vec3& x, int a, double E,
                             RaySettings rs, CharMode mode) {
  return charged_point(domain, grid, emap, S, Sigma, C, f, g, x, a, E,
                       default_hray(domain, rs), mode);
}

}  // namespace csda
