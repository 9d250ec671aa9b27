#pragma once

// Explicit ray/energy characteristic solvers: attenuated lifts of inflow
// data, the homogeneous-inflow source solve, the closed-form primary
// (uncollided) solutions for energy-independent scattering and x-independent
// stopping power, and the characteristic inverse P0^{-1} that source
// iteration is built on.
//
// Two operator modes share the code path:
//   Conservative: -d(S u)/dE + w.grad u + Sigma u = h   (the forward CSDA)
//   Advective:    -S du/dE  + w.grad u + Sigma u = h    (the reversed adjoint)
// They differ only in the S-density weights along the energy characteristic.

#include <functional>

#include "csda/geometry.hpp"
#include "csda/grid.hpp"

namespace csda {

// Total cross sections as closures.
using XsFn = std::function<double(const Vec3&, const Vec3&, double)>;
using XsFnXW = std::function<double(const Vec3&, const Vec3&)>;
// Volume/boundary data evaluated at an exact point, an angular grid node,
// and an arbitrary energy.
using VolData = std::function<double(const Vec3&, int, double)>;
using BdryData = std::function<double(const Vec3&, int, double)>;

struct StoppingPower {
  std::function<double(double)> S;  // energy-only restricted stopping power
  double kappa = 0.0;               // inf S (> 0 required)
  double q = 0.0;                   // 1/2 sup dS/dE
  double C = 0.0;                   // max{q, 0} / kappa

  static StoppingPower from_function(std::function<double(double)> S,
                                     double E0, double Em);
};

// R(E) = int_{E0}^{E} dtau / S(tau) with its inverse; strictly increasing.
class EnergyMap {
 public:
  EnergyMap() = default;
  EnergyMap(const std::function<double(double)>& S, double E0, double Em);

  double R(double E) const;
  double R_inv(double eta) const;
  double r_m() const { return r_m_; }
  double E0() const { return E0_; }
  double Em() const { return Em_; }

 private:
  double E0_ = 0.0, Em_ = 1.0, r_m_ = 1.0, h_ = 0.0;
  std::vector<double> eta_;    // samples of R on a uniform energy grid
  std::vector<double> slope_;  // limited slopes for the pchip evaluation
};

enum class CharMode { Conservative, Advective };

struct RaySettings {
  double h_ray = 0.0;  // <= 0 means diameter/64
};

// psi = e^{-int_0^t Sigma} g(x - t w, w, E): the attenuated lift of inflow
// data (null Sigma means pure transport).
void lift_minus(const Domain& domain, const PhaseGrid& grid, const XsFn& Sigma,
                const BdryData& g, Field& out, int s,
                RaySettings rs = {});

// (L_-^* w)(y,w,E) = (1/tau) int_0^tau w(y + t w) dt on inflow nodes.
void lift_adjoint(const Domain& domain, const PhaseGrid& grid, const Field& w,
                  int s, BoundaryField& out, RaySettings rs = {});

// psi = int_0^{t(x,w)} e^{-int_0^t Sigma} f(x - t w, w, E) dt with
// homogeneous inflow data.
void solve_inflow_source(const Domain& domain, const PhaseGrid& grid,
                         const XsFn& Sigma, const VolData& f, Field& out,
                         int s, RaySettings rs = {});

// u1 of the primary problem: inflow-source solve plus attenuated lift.
void primary_photon(const Domain& domain, const PhaseGrid& grid,
                    const XsFn& Sigma, const VolData& f, const BdryData& g,
                    Field& out, int s, RaySettings rs = {});

// Charged-species characteristic inverse with homogeneous data
// (Eq. form: (1/S(E)) int_0^{min{r_m - R(E), t}} e^{-int Sigma - C dE}
//  S h (x - s w, w, R^{-1}(R(E)+s)) ds). The exponential-tilt constant C
// enters through the exact closed form exp(-C (E(s) - E)).
void apply_P0_inverse(const Domain& domain, const PhaseGrid& grid,
                      const EnergyMap& emap,
                      const std::function<double(double)>& S,
                      const XsFnXW& Sigma, double C, const VolData& h,
                      Field& out, int s, RaySettings rs = {},
                      CharMode mode = CharMode::Conservative);

// Full primary solution for a charged species: P0^{-1} of f plus the
// Heaviside-gated, attenuated boundary part at the shifted energy
// coordinate. g must satisfy g(.,.,Em) = 0.
void primary_charged(const Domain& domain, const PhaseGrid& grid,
                     const EnergyMap& emap,
                     const std::function<double(double)>& S,
                     const XsFnXW& Sigma, double C, const VolData& f,
                     const BdryData& g, Field& out, int s,
                     RaySettings rs = {},
                     CharMode mode = CharMode::Conservative);

// Boundary-lift part of primary_charged alone (used for trace extraction).
double primary_charged_point(const Domain& domain, const PhaseGrid& grid,
                             const EnergyMap& emap,
                             const std::function<double(double)>& S,
                             const XsFnXW& Sigma, double C, const VolData& f,
                             const BdryData& g, const Vec3& x, int a, double E,
                             RaySettings rs, CharMode mode);

// Point evaluation of primary_photon (trace extraction at boundary nodes).
double primary_photon_point(const Domain& domain, const PhaseGrid& grid,
                            const XsFn& Sigma, const VolData& f,
                            const BdryData& g, const Vec3& x, int a, double E,
                            RaySettings rs);

}  // namespace csda
