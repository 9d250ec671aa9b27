#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "csda/collision.hpp"
#include "csda/hadamard.hpp"
#include "csda/xsection.hpp"

using namespace csda;

namespace {

PhaseGrid tiny_grid(int species = 1, int nx = 2, int nth = 4, int nph = 4,
                    int nE = 4) {
  GridSpec s;
  s.nx = nx;
  s.n_theta = nth;
  s.n_phi = nph;
  s.n_E = nE;
  s.E0 = 0.1;
  s.Em = 1.0;
  s.species = species;
  s.n_surf = 4;
  return PhaseGrid(Domain::box({0, 0, 0}, {1, 1, 1}), s);
}

Field random_field(const PhaseGrid& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Field f(g);
  for (double& v : f.data()) v = n(rng);
  return f;
}

}  // namespace

TEST_CASE("zero and constant kernels") {
  PhaseGrid grid = tiny_grid();
  Field one(grid);
  for (double& v : one.data()) v = 1.0;
  Field z = apply_K(KernelSet::zero(1), grid, one);
  CHECK(l2_norm(grid, z) == doctest::Approx(0.0));
  // Constant kernel on psi = 1: K psi = 4 pi |I| s0 everywhere.
  const double s0 = 0.3;
  Field k = apply_K(KernelSet::constant(1, s0), grid, one);
  const double expect = 4 * M_PI * 0.9 * s0;
  for (double v : k.data()) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("single-node probe extracts a kernel column") {
  PhaseGrid grid = tiny_grid();
  KernelSet ks = KernelSet::zero(1);
  ks.entry(0, 0).fn = [](const Vec3& x, const Vec3& wp, const Vec3& w,
                         double Ep, double E) {
    return 1.0 + 0.1 * x.x + 0.2 * dot(wp, w) + Ep * E;
  };
  Field probe(grid);
  probe.at(0, 1, 2, 3) = 1.0;
  Field out = apply_K(ks, grid, probe);
  // Out(node') must equal w_{w'} w_{E'} sigma at the probe arguments.
  const double expect = grid.ww(2) * grid.wE(3) *
                        ks.entry(0, 0).fn(grid.x(1), grid.omega(2),
                                          grid.omega(1), grid.E(3),
                                          grid.E(1));
  CHECK(out.at(0, 0, 1, 1) == doctest::Approx(0.0));  // K is local in x
  CHECK(out.at(0, 1, 1, 1) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("tabulated and direct application agree") {
  PhaseGrid grid = tiny_grid(1, 2, 4, 4, 3);
  KernelSet ks = KernelSet::zero(1);
  ks.entry(0, 0).fn = [](const Vec3& x, const Vec3& wp, const Vec3& w,
                         double Ep, double E) {
    return 0.5 + 0.3 * x.y + 0.1 * dot(wp, w) * Ep + 0.2 * E;
  };
  const Field psi = random_field(grid, 3);
  KernelApplier tab(ks, grid);        // tabulates at this size
  KernelApplier direct(ks, grid, 0);  // forced on-the-fly
  const Field a = tab.apply(psi);
  const Field b = direct.apply(psi);
  for (size_t i = 0; i < a.data().size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
  const Field aa = tab.apply_adjoint(psi);
  const Field bb = direct.apply_adjoint(psi);
  for (size_t i = 0; i < aa.data().size(); ++i)
    CHECK(aa.data()[i] == doctest::Approx(bb.data()[i]).epsilon(1e-12));
}

TEST_CASE("linearity") {
  PhaseGrid grid = tiny_grid();
  KernelSet ks = KernelSet::constant(1, 0.2);
  const Field f1 = random_field(grid, 5), f2 = random_field(grid, 6);
  Field comb = f1;
  comb *= 2.0;
  Field tmp = f2;
  tmp *= -0.5;
  comb += tmp;
  Field lhs = apply_K(ks, grid, comb);
  Field r1 = apply_K(ks, grid, f1);
  Field r2 = apply_K(ks, grid, f2);
  for (size_t i = 0; i < lhs.data().size(); ++i)
    CHECK(lhs.data()[i] ==
          doctest::Approx(2.0 * r1.data()[i] - 0.5 * r2.data()[i])
              .epsilon(1e-12));
}

TEST_CASE("adjoint duality and symmetry") {
  for (int species : {1, 3}) {
    PhaseGrid grid = tiny_grid(species, 2, 3, 4, 3);
    KernelSet ks = KernelSet::zero(species);
    for (int k = 0; k < species; ++k)
      for (int j = 0; j < species; ++j)
        ks.entry(k, j).fn = [k, j](const Vec3& x, const Vec3& wp,
                                   const Vec3& w, double Ep, double E) {
          return 0.1 * (1 + k + 2 * j) + 0.05 * x.z +
                 0.02 * dot(wp, w) * (Ep + 2 * E);
        };
    const Field psi = random_field(grid, 7), v = random_field(grid, 8);
    const Field Kpsi = apply_K(ks, grid, psi);
    const Field Ksv = apply_K_adjoint(ks, grid, v);
    const double lhs = l2_inner(grid, Kpsi, v);
    const double rhs = l2_inner(grid, psi, Ksv);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
  // Symmetric kernel: K* = K.
  PhaseGrid grid = tiny_grid();
  KernelSet sym = KernelSet::zero(1);
  sym.entry(0, 0).fn = [](const Vec3&, const Vec3& wp, const Vec3& w,
                          double Ep, double E) {
    return 1.0 + dot(wp, w) + Ep * E;
  };
  const Field f = random_field(grid, 9);
  const Field a = apply_K(sym, grid, f);
  const Field b = apply_K_adjoint(sym, grid, f);
  for (size_t i = 0; i < a.data().size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("in-energy-group kernels collapse the energy quadrature") {
  PhaseGrid grid = tiny_grid();
  KernelSet ks = KernelSet::zero(1);
  ks.entry(0, 0).fn = [](const Vec3&, const Vec3&, const Vec3&, double,
                         double E) { return 0.1 * E; };
  ks.entry(0, 0).in_energy_group = true;
  Field one(grid);
  for (double& v : one.data()) v = 1.0;
  Field out = apply_K(ks, grid, one);
  for (int k = 0; k < grid.n_energy(); ++k)
    CHECK(out.at(0, 0, 0, k) ==
          doctest::Approx(4 * M_PI * 0.1 * grid.E(k)).epsilon(1e-12));
  // Duality still exact.
  const Field psi = random_field(grid, 10), v = random_field(grid, 11);
  CHECK(l2_inner(grid, apply_K(ks, grid, psi), v) ==
        doctest::Approx(l2_inner(grid, psi, apply_K_adjoint(ks, grid, v)))
            .epsilon(1e-12));
}

TEST_CASE("tilted kernels") {
  PhaseGrid grid = tiny_grid();
  KernelSet ks = KernelSet::constant(1, 1.0);
  KernelSet t0 = tilt_kernels(ks, 0.0);
  CHECK(t0.tilt_C == doctest::Approx(0.0));
  CHECK(std::exp(1.0 * 0.5) == doctest::Approx(1.648721).epsilon(1e-6));
  KernelSet t1 = tilt_kernels(ks, 1.0);
  Field one(grid);
  for (double& v : one.data()) v = 1.0;
  const Field a = apply_K(ks, grid, one);
  const Field b = apply_K(t1, grid, one);
  // The tilt reweights off-diagonal energy transfer, so values change...
  CHECK(l2_norm(grid, a) != doctest::Approx(l2_norm(grid, b)));
  // ...but the E = E' diagonal weight e^0 = 1 is untouched: a kernel
  // supported on the diagonal (in-group) is tilt-invariant.
  KernelSet diag = KernelSet::zero(1);
  diag.entry(0, 0).fn = [](const Vec3&, const Vec3&, const Vec3&, double,
                           double) { return 0.3; };
  diag.entry(0, 0).in_energy_group = true;
  const Field d0 = apply_K(diag, grid, one);
  const Field d1 = apply_K(tilt_kernels(diag, 2.0), grid, one);
  for (size_t i = 0; i < d0.data().size(); ++i)
    CHECK(d0.data()[i] == doctest::Approx(d1.data()[i]).epsilon(1e-15));
}

TEST_CASE("schur bounds certify the operator norm") {
  PhaseGrid grid = tiny_grid(1, 2, 4, 4, 4);
  const double s0 = 0.25;
  KernelSet ks = KernelSet::constant(1, s0);
  const SchurBounds b = schur_bounds(ks, grid);
  CHECK(b.M1 == doctest::Approx(4 * M_PI * 0.9 * s0).epsilon(1e-12));
  CHECK(b.M2 == doctest::Approx(b.M1).epsilon(1e-12));
  const SchurBounds z = schur_bounds(KernelSet::zero(1), grid);
  CHECK(z.norm_bound == doctest::Approx(0.0));
  KernelApplier ka(ks, grid);
  for (int i = 0; i < 100; ++i) {
    const Field psi = random_field(grid, 100 + i);
    const double ratio = l2_norm(grid, ka.apply(psi)) / l2_norm(grid, psi);
    CHECK(ratio <= b.norm_bound * (1 + 1e-12));
  }
}

TEST_CASE("positivity of the kernel application") {
  PhaseGrid grid = tiny_grid();
  KernelSet ks = KernelSet::zero(1);
  ks.entry(0, 0).fn = [](const Vec3&, const Vec3& wp, const Vec3& w, double,
                         double) { return 0.1 * (1.1 + dot(wp, w)); };
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Field psi(grid);
  for (double& v : psi.data()) v = u(rng);
  Field out = apply_K(ks, grid, psi);
  for (double v : out.data()) CHECK(v >= 0.0);
}

TEST_CASE("accretivity margin") {
  PhaseGrid grid = tiny_grid(1, 2, 4, 4, 4);
  ScatterData sc;
  sc.Sigma = {[](const Vec3&, const Vec3&, double) { return 1.0; }};
  // Sigma = 1, sigma = 0: margin is exactly 1.
  CHECK(accretivity_margin(sc, KernelSet::zero(1), 0.0, grid) ==
        doctest::Approx(1.0));
  // Constant kernel with both integrals 0.5: margin 0.5.
  const double s0 = 0.5 / (4 * M_PI * 0.9);
  KernelSet ks = KernelSet::constant(1, s0);
  const double c = accretivity_margin(sc, ks, 0.0, grid);
  CHECK(c == doctest::Approx(0.5).epsilon(1e-12));
  // Quadratic form bound <(Sigma - K) phi, phi> >= c |phi|^2.
  KernelApplier ka(ks, grid);
  for (int i = 0; i < 100; ++i) {
    Field phi = random_field(grid, 500 + i);
    Field Kphi = ka.apply(phi);
    double q = 0.0;
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k) {
          const double w = grid.wx(ix) * grid.ww(a) * grid.wE(k);
          const double ph = phi.at(0, ix, a, k);
          q += w * (1.0 * ph - Kphi.at(0, ix, a, k)) * ph;
        }
    const double n2 = l2_inner(grid, phi, phi);
    CHECK(q >= (c - 1e-8) * n2);
  }
}

TEST_CASE("compton path-integral application") {
  GridSpec s;
  s.nx = 1;
  s.n_theta = 16;
  s.n_phi = 32;
  s.n_E = 6;
  s.E0 = 0.1;
  s.Em = 1.0;
  s.n_surf = 4;
  PhaseGrid grid(Domain::box({0, 0, 0}, {1, 1, 1}), s);
  auto sigma0 = [](const Vec3&) { return 1.0; };

  // sigma0 = 0 gives zero.
  Field one(grid);
  for (double& v : one.data()) v = 1.0;
  Field z = apply_K_compton_path([](const Vec3&) { return 0.0; }, grid, one);
  CHECK(l2_norm(grid, z) == doctest::Approx(0.0));

  // psi = 1: the path integral reduces to a 1-D energy quadrature oracle
  //   sum_E' wE' chi sigma_hat 2 pi.
  Field path = apply_K_compton_path(sigma0, grid, one);
  for (int k = 0; k < grid.n_energy(); ++k) {
    double oracle = 0.0;
    for (int kp = 0; kp < grid.n_energy(); ++kp) {
      const auto kin = compton_kinematics(grid.E(kp), grid.E(k), grid.E0());
      if (kin.chi && std::abs(kin.mu) <= 1.0)
        oracle += grid.wE(kp) * kin.sigma_hat * 2 * M_PI;
    }
    CHECK(path.at(0, 0, 3, k) == doctest::Approx(oracle).epsilon(1e-10));
  }

  // Full mollified operator at a resolvable width stays close to the
  // path-integral form on a smooth field.
  Field smooth(grid);
  for (int a = 0; a < grid.n_angular(); ++a)
    for (int k = 0; k < grid.n_energy(); ++k)
      smooth.at(0, 0, a, k) = 1.0 + 0.5 * grid.omega(a).z + 0.2 * grid.E(k);
  const Field ref = apply_K_compton_path(sigma0, grid, smooth, 256);
  {
    KernelSet ks = KernelSet::zero(1);
    const double E0 = grid.E0();
    ks.entry(0, 0).fn = [E0](const Vec3&, const Vec3& wp, const Vec3& w,
                             double Ep, double E) {
      const auto kin = compton_kinematics(Ep, E, E0);
      if (!kin.chi) return 0.0;
      return kin.sigma_hat * mollified_delta_cosine(0.3, dot(wp, w), kin.mu);
    };
    Field moll = apply_K(ks, grid, smooth);
    Field diff = moll;
    diff -= ref;
    CHECK(l2_norm(grid, diff) / l2_norm(grid, ref) < 0.05);
  }
}

TEST_CASE("mollified compton converges to the path form as eps -> 0") {
  // Single output node of the same quadrature sum apply_K performs, on an
  // angular grid fine enough to resolve the smallest bump.
  GridSpec s;
  s.nx = 1;
  s.n_theta = 128;
  s.n_phi = 64;
  s.n_E = 6;
  s.E0 = 0.1;
  s.Em = 1.0;
  s.n_surf = 4;
  PhaseGrid grid(Domain::box({0, 0, 0}, {1, 1, 1}), s);
  auto psi = [](const Vec3& wp, double Ep) {
    return 1.0 + 0.5 * wp.z + 0.3 * wp.x + 0.2 * Ep;
  };
  const Vec3 w = grid.omega(5 * grid.spec().n_phi + 3);
  const double E = grid.E(1);
  // Path-integral reference.
  double ref = 0.0;
  for (int kp = 0; kp < grid.n_energy(); ++kp) {
    const auto kin = compton_kinematics(grid.E(kp), E, grid.E0());
    if (!kin.chi || std::abs(kin.mu) > 1.0) continue;
    ref += grid.wE(kp) * kin.sigma_hat *
           circle_average([&](const Vec3& wp) { return psi(wp, grid.E(kp)); },
                          w, kin.mu, 512);
  }
  double prev_err = -1.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    double val = 0.0;
    for (int ap = 0; ap < grid.n_angular(); ++ap)
      for (int kp = 0; kp < grid.n_energy(); ++kp) {
        const auto kin = compton_kinematics(grid.E(kp), E, grid.E0());
        if (!kin.chi) continue;
        val += grid.ww(ap) * grid.wE(kp) * kin.sigma_hat *
               mollified_delta_cosine(eps, dot(grid.omega(ap), w), kin.mu) *
               psi(grid.omega(ap), grid.E(kp));
      }
    const double err = std::abs(val - ref) / std::abs(ref);
    if (prev_err >= 0.0) CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 0.01);
}

TEST_CASE("table kernel lookup") {
  // 2x2x2 lattice in (Ep, E, mu), values 0..7 row-major.
  TableKernel t({0.0, 1.0}, {0.0, 1.0}, {-1.0, 1.0},
                {0., 1., 2., 3., 4., 5., 6., 7.});
  CHECK(t(0.0, 0.0, -1.0) == doctest::Approx(0.0));
  CHECK(t(1.0, 1.0, 1.0) == doctest::Approx(7.0));
  // Bilinear in (Ep, E) on the mu = -1 plane.
  CHECK(t(0.5, 0.5, -1.0) == doctest::Approx((0. + 2. + 4. + 6.) / 4));
  // Nearest in mu.
  CHECK(t(0.0, 0.0, 0.2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(TableKernel({0.0}, {0.0}, {0.0}, {1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("nan kernels abort with a diagnostic") {
  PhaseGrid grid = tiny_grid();
  KernelSet ks = KernelSet::zero(1);
  ks.entry(0, 0).fn = [](const Vec3&, const Vec3&, const Vec3&, double,
                         double) { return std::nan(""); };
  Field one(grid);
  for (double& v : one.data()) v = 1.0;
  CHECK_THROWS_AS(apply_K(ks, grid, one), std::runtime_error);
}
