#pragma once

// Hadamard finite-part operators on [E, Em],
//   H1 u = p.f. int_E^Em u(E')/(E'-E)   dE'
//   H2 u = p.f. int_E^Em u(E')/(E'-E)^2 dE',
// evaluated through their Taylor-subtracted closed forms (stable), plus the
// smooth mollifier used wherever a delta in angle or energy is regularized.

#include <functional>

namespace csda {

using Real1D = std::function<double(double)>;

// H1 u = int (u(E')-u(E))/(E'-E) dE' + u(E) ln(Em-E).
double hadamard_fp1(const Real1D& u, double E, double Em);

// H2 u = -u(E)/(Em-E) + u'(E) ln(Em-E) + int (subtracted second-order rest).
double hadamard_fp2(const Real1D& u, double E, double Em);

// | d/dE H1 u (central difference, step h)  -  (H2 u - u'(E)) |.
double hadamard_derivative_residual(const Real1D& u, double E, double Em,
                                    double h);

// Unit-mass C-infinity bump eta_eps(x) = theta(x/eps)/eps supported on
// [-eps, eps]; theta normalized once to machine precision.
double mollified_delta(double eps, double x);

// The same bump used as a delta in the scattering cosine: renormalized so
// its mass on [-1, 1] stays 1 when mu sits at a kinematic edge (mu = +-1),
// where the plain bump would lose half its weight.
double mollified_delta_cosine(double eps, double t, double mu);

// Epsilon-limit definitions (test oracles; Richardson-extrapolated in eps).
double hadamard_fp1_eps_oracle(const Real1D& u, double E, double Em,
                               double eps);
double hadamard_fp2_eps_oracle(const Real1D& u, double E, double Em,
                               double eps);

}  // namespace csda
