#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "csda/grid.hpp"

using namespace csda;

namespace {

GridSpec small_spec(int nx = 12, int nth = 6, int nph = 12, int nE = 6) {
  GridSpec s;
  s.nx = nx;
  s.n_theta = nth;
  s.n_phi = nph;
  s.n_E = nE;
  s.E0 = 0.0;
  s.Em = 1.0;
  s.n_surf = 16;
  return s;
}

}  // namespace

TEST_CASE("grid weights reproduce the exact measures") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  PhaseGrid grid(ball, small_spec());
  double wsum = 0.0;
  for (int a = 0; a < grid.n_angular(); ++a) wsum += grid.ww(a);
  CHECK(wsum == doctest::Approx(4 * M_PI).epsilon(1e-10));
  double esum = 0.0;
  for (int k = 0; k < grid.n_energy(); ++k) esum += grid.wE(k);
  CHECK(esum == doctest::Approx(1.0).epsilon(1e-10));
  double xsum = 0.0;
  for (int i = 0; i < grid.n_spatial(); ++i) xsum += grid.wx(i);
  CHECK(xsum == doctest::Approx(ball.volume()).epsilon(1e-12));
  for (int i = 0; i < grid.n_spatial(); ++i) CHECK(grid.wx(i) > 0);
}

TEST_CASE("integrate_phase of simple fields") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  PhaseGrid grid(ball, small_spec());
  Field one(grid);
  for (double& v : one.data()) v = 1.0;
  const double measure = 4.0 / 3.0 * M_PI * 4.0 * M_PI * 1.0;  // ~52.6379
  CHECK(integrate_phase(grid, one) == doctest::Approx(measure).epsilon(1e-10));
  Field zero(grid);
  CHECK(integrate_phase(grid, zero) == doctest::Approx(0.0));
  Field scaled = one;
  scaled *= 1.0 / measure;
  CHECK(integrate_phase(grid, scaled) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("boundary measure of the unit ball inflow set") {
  // int_{Gamma'_-} |w.nu| dsigma dw = area * int_{S, w.n<0} |w.n| dw
  //                                 = 4 pi * pi.
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  PhaseGrid grid(ball, small_spec());
  BoundaryField h(grid, Orientation::Inflow);
  h.fill(0, [](const Vec3&, const Vec3&, double) { return 1.0; });
  const double expected = std::sqrt(4 * M_PI * M_PI * 1.0);
  CHECK(t2_boundary_norm(h, false) ==
        doctest::Approx(expected).epsilon(1e-4));
  BoundaryField z(grid, Orientation::Inflow);
  CHECK(t2_boundary_norm(z, false) == doctest::Approx(0.0));
  BoundaryField h2 = h;
  h2 *= 2.0;
  CHECK(t2_boundary_norm(h2, false) ==
        doctest::Approx(2 * t2_boundary_norm(h, false)).epsilon(1e-12));
}

TEST_CASE("h1 norm composes its parts") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  PhaseGrid grid(ball, small_spec());
  TraceField zero = make_trace_field(
      grid, [](int, const Vec3&, const Vec3&, double) { return 0.0; });
  CHECK(h1_norm(grid, zero) == doctest::Approx(0.0));

  TraceField inner = make_trace_field(
      grid, [](int, const Vec3&, const Vec3&, double) { return 1.0; });
  // Drop traces and slices: the norm reduces to the plain L2 norm.
  inner.trace_minus *= 0.0;
  inner.trace_plus *= 0.0;
  std::fill(inner.slice_E0.begin(), inner.slice_E0.end(), 0.0);
  std::fill(inner.slice_Em.begin(), inner.slice_Em.end(), 0.0);
  CHECK(h1_norm(grid, inner) ==
        doctest::Approx(l2_norm(grid, inner.vol)).epsilon(1e-12));

  // Constant 1: closed-form measures of all four parts.
  TraceField one = make_trace_field(
      grid, [](int, const Vec3&, const Vec3&, double) { return 1.0; });
  const double vol = 4.0 / 3.0 * M_PI * 4 * M_PI;
  const double bdry = 4 * M_PI * 2 * M_PI;  // both halves of Gamma
  const double slices = 2.0 * 4.0 / 3.0 * M_PI * 4 * M_PI;
  CHECK(h1_norm(grid, one) ==
        doctest::Approx(std::sqrt(vol + bdry + slices)).epsilon(2e-3));
}

TEST_CASE("boundary ray integral agrees with the volume quadrature") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  PhaseGrid grid(ball, small_spec());
  const double measure = 4.0 / 3.0 * M_PI * 4 * M_PI;
  const double v1 = boundary_ray_integral(
      ball, grid, [](const Vec3&, const Vec3&, double) { return 1.0; });
  CHECK(v1 == doctest::Approx(measure).epsilon(0.01));
  const double v0 = boundary_ray_integral(
      ball, grid, [](const Vec3&, const Vec3&, double) { return 0.0; });
  CHECK(v0 == doctest::Approx(0.0));

  // Smooth integrand: both integrators against each other, and the
  // disagreement shrinks under refinement.
  auto f = [](const Vec3& x, const Vec3& w, double E) {
    return std::exp(-dot(x, x)) * (1.0 + 0.3 * w.z) * (1.0 + E);
  };
  const auto volume_quad = [&](const PhaseGrid& g) {
    double sum = 0.0;
    for (int i = 0; i < g.n_spatial(); ++i)
      for (int a = 0; a < g.n_angular(); ++a)
        for (int k = 0; k < g.n_energy(); ++k)
          sum += g.wx(i) * g.ww(a) * g.wE(k) * f(g.x(i), g.omega(a), g.E(k));
    return sum;
  };
  const double coarse =
      std::abs(boundary_ray_integral(ball, grid, f) - volume_quad(grid));
  CHECK(coarse <= 0.01 * std::abs(volume_quad(grid)));
  PhaseGrid fine(ball, small_spec(24, 12, 24, 12));
  const double refined = std::abs(boundary_ray_integral(ball, fine, f, 0.01) -
                                  volume_quad(fine));
  CHECK(refined < coarse);
}

TEST_CASE("norm axioms on random fields") {
  const Domain box = Domain::box({0, 0, 0}, {1, 1, 1});
  PhaseGrid grid(box, small_spec(6, 4, 6, 4));
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  Field a(grid), b(grid);
  for (double& v : a.data()) v = n(rng);
  for (double& v : b.data()) v = n(rng);
  const double na = l2_norm(grid, a), nb = l2_norm(grid, b);
  Field sum = a;
  sum += b;
  CHECK(l2_norm(grid, sum) <= na + nb + 1e-12);
  Field scaled = a;
  scaled *= -2.5;
  CHECK(l2_norm(grid, scaled) == doctest::Approx(2.5 * na).epsilon(1e-12));
}

TEST_CASE("lift isometry driver via the ray-parametrized integral") {
  // f = g(x - t(x,w) w, w, E)^2 integrates to int g^2 tau_- |w.nu|.
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  PhaseGrid grid(ball, small_spec(16, 6, 12, 4));
  auto g = [](const Vec3& y, const Vec3& w, double E) {
    return 1.0 + 0.5 * y.z * w.x + 0.25 * E;
  };
  auto f = [&](const Vec3& x, const Vec3& w, double E) {
    const double t = ball.exit_distance(x, -w);
    const double gv = g(x - w * t, w, E);
    return gv * gv;
  };
  // Right side evaluated on the inflow boundary quadrature.
  BoundaryField bf(grid, Orientation::Inflow);
  bf.fill(0, g);
  const double rhs = t2_boundary_norm(bf, true);
  const double lhs = std::sqrt(boundary_ray_integral(ball, grid, f, 0.02));
  CHECK(lhs == doctest::Approx(rhs).epsilon(0.01));
}

TEST_CASE("spatial interpolation reproduces node values and linear fields") {
  const Domain box = Domain::box({0, 0, 0}, {1, 1, 1});
  PhaseGrid grid(box, small_spec(8, 2, 4, 3));
  Field f(grid);
  for (int i = 0; i < grid.n_spatial(); ++i)
    for (int a = 0; a < grid.n_angular(); ++a)
      for (int k = 0; k < grid.n_energy(); ++k)
        f.at(0, i, a, k) = 1.0 + 2.0 * grid.x(i).x - grid.x(i).y;
  CHECK(eval_spatial(grid, f, 0, grid.x(3), 0, 0) ==
        doctest::Approx(f.at(0, 3, 0, 0)).epsilon(1e-12));
  CHECK(eval_spatial(grid, f, 0, {0.43, 0.52, 0.61}, 0, 0) ==
        doctest::Approx(1.0 + 2.0 * 0.43 - 0.52).epsilon(1e-10));
}
