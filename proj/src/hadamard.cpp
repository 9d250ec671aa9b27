#include "csda/hadamard.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "csda/grid.hpp"

namespace csda {

namespace {

constexpr int kPanels = 256;
constexpr int kGaussPts = 8;

struct GaussTable {
  std::vector<double> x, w;
  GaussTable() { gauss_legendre(kGaussPts, x, w); }
};
const GaussTable& gauss8() {
  static const GaussTable t;
  return t;
}

double gauss_panel(const std::function<double(double)>& f, double a,
                   double b) {
  const GaussTable& g = gauss8();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double acc = 0.0;
  for (int q = 0; q < kGaussPts; ++q) acc += g.w[q] * f(c + h * g.x[q]);
  return acc * h;
}

// Composite Gauss quadrature of f on [a,b] (nodes never touch endpoints).
double integrate(const std::function<double(double)>& f, double a, double b,
                 int panels = kPanels) {
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p)
    sum += gauss_panel(f, a + p * h, a + (p + 1) * h);
  return sum;
}

// Quadrature of f on [a,b] graded geometrically toward the singular point
// x < a (for the brute-force epsilon-limit oracles).
double integrate_graded(const std::function<double(double)>& f, double a,
                        double b, double x) {
  double lo = a;
  double sum = 0.0;
  while (lo < b) {
    const double hi = std::min(b, x + 2.0 * (lo - x));
    sum += gauss_panel(f, lo, hi);
    lo = hi;
  }
  return sum;
}

// One-sided derivatives at the left endpoint (u only defined on [E, Em]).
double deriv1_right(const Real1D& u, double E, double h) {
  return (-3.0 * u(E) + 4.0 * u(E + h) - u(E + 2 * h)) / (2.0 * h);
}

double deriv2_right(const Real1D& u, double E, double h) {
  return (2.0 * u(E) - 5.0 * u(E + h) + 4.0 * u(E + 2 * h) - u(E + 3 * h)) /
         (h * h);
}

void check_interval(double E, double Em) {
  if (!(E < Em)) throw std::invalid_argument("hadamard: requires E < Em");
}

}  // namespace

double hadamard_fp1(const Real1D& u, double E, double Em) {
  check_interval(E, Em);
  const double L = Em - E;
  const double uE = u(E);
  const double du = deriv1_right(u, E, 1e-5 * L);
  const double cut = 1e-7 * L;
  const double sub = integrate(
      [&](double Ep) {
        const double d = Ep - E;
        if (d < cut) return du;
        return (u(Ep) - uE) / d;
      },
      E, Em);
  return sub + uE * std::log(L);
}

double hadamard_fp2(const Real1D& u, double E, double Em) {
  check_interval(E, Em);
  const double L = Em - E;
  const double uE = u(E);
  const double hd = 1e-4 * L;
  const double du = deriv1_right(u, E, hd);
  const double ddu = deriv2_right(u, E, hd);
  // Taylor-subtracted second-order rest; near the endpoint the quotient
  // cancels catastrophically, so switch to its limit value there.
  const double cut = 1e-4 * L;
  const double rest = integrate(
      [&](double Ep) {
        const double d = Ep - E;
        if (d < cut) return 0.5 * ddu;
        return (u(Ep) - uE - du * d) / (d * d);
      },
      E, Em);
  return -uE / L + du * std::log(L) + rest;
}

double hadamard_derivative_residual(const Real1D& u, double E, double Em,
                                    double h) {
  check_interval(E, Em);
  if (!(h > 0.0) || E + h >= Em)
    throw std::invalid_argument("hadamard: step h exits the interval");
  const double lhs =
      (hadamard_fp1(u, E + h, Em) - hadamard_fp1(u, E - h, Em)) / (2 * h);
  const double du = deriv1_right(u, E, 1e-5 * (Em - E));
  const double rhs = hadamard_fp2(u, E, Em) - du;
  return std::abs(lhs - rhs);
}

double hadamard_fp1_eps_oracle(const Real1D& u, double E, double Em,
                               double eps) {
  check_interval(E, Em);
  const auto at = [&](double e) {
    return integrate_graded([&](double Ep) { return u(Ep) / (Ep - E); },
                            E + e, Em, E) +
           u(E) * std::log(e);
  };
  // One Richardson step kills the O(eps) truncation.
  return 2.0 * at(eps / 2) - at(eps);
}

double hadamard_fp2_eps_oracle(const Real1D& u, double E, double Em,
                               double eps) {
  check_interval(E, Em);
  const double du = deriv1_right(u, E, 1e-4 * (Em - E));
  const auto at = [&](double e) {
    return integrate_graded(
               [&](double Ep) { return u(Ep) / ((Ep - E) * (Ep - E)); },
               E + e, Em, E) +
           du * std::log(e) - u(E) / e;
  };
  return 2.0 * at(eps / 2) - at(eps);
}

double mollified_delta(double eps, double x) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollifier: eps must be > 0");
  // One-time normalization of theta(t) = exp(-1/(1-t^2)) on (-1,1).
  static const double mass = integrate(
      [](double t) {
        const double s = 1.0 - t * t;
        return s > 0 ? std::exp(-1.0 / s) : 0.0;
      },
      -1.0, 1.0, 512);
  const double t = x / eps;
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - t * t)) / (mass * eps);
}

double mollified_delta_cosine(double eps, double t, double mu) {
  const double v = mollified_delta(eps, t - mu);
  if (v == 0.0) return 0.0;
  if (mu - eps >= -1.0 && mu + eps <= 1.0) return v;  // support inside
  const double lo = std::max(-1.0, mu - eps);
  const double hi = std::min(1.0, mu + eps);
  const double mass = integrate(
      [&](double tau) { return mollified_delta(eps, tau - mu); }, lo, hi, 8);
  return mass > 0.0 ? v / mass : 0.0;
}

}  // namespace csda
