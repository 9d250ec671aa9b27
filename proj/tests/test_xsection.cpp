#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csda/xsection.hpp"

using namespace csda;

TEST_CASE("compton photon kinematics") {
  // No energy loss: forward scattering.
  auto k = compton_kinematics(1.0, 1.0);
  CHECK(k.mu == doctest::Approx(1.0));
  CHECK(k.chi);
  // Full backscatter at E = E'/(1+2E'): invert E = E'/(1+E'(1-mu)) at mu=-1.
  k = compton_kinematics(1.0, 1.0 / 3.0);
  CHECK(k.mu == doctest::Approx(-1.0));
  CHECK(k.chi);
  // Kinematic edge at E' = 2.
  k = compton_kinematics(2.0, 0.4);
  CHECK(k.mu == doctest::Approx(-1.0));
  CHECK(k.chi);
  // E > E' excluded.
  CHECK(!compton_kinematics(1.0, 1.5).chi);
}

TEST_CASE("compton kinematic closure identity") {
  // |E - E'/(1 + E'(1-mu11))| vanishes identically where chi = 1.
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 100; ++j) {
      const double Ep = 0.05 + 2.0 * i / 99.0;
      const double E = 0.05 + 2.0 * j / 99.0;
      const auto k = compton_kinematics(Ep, E);
      if (!k.chi) continue;
      const double back = Ep / (1.0 + Ep * (1.0 - k.mu));
      CHECK(std::abs(E - back) <= 1e-12);
    }
}

TEST_CASE("compton recoil kinematics") {
  // Max transfer 2E'^2/(1+2E') = 1.6 at E' = 2: forward recoil.
  auto k = compton_recoil_kinematics(2.0, 1.6);
  CHECK(k.mu == doctest::Approx(1.0));
  CHECK(k.chi);
  // Beyond max transfer: excluded.
  CHECK(!compton_recoil_kinematics(2.0, 2.0).chi);
  // mu12 -> 0 as E -> 0+.
  CHECK(compton_recoil_kinematics(1.0, 1e-12).mu ==
        doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("moller kinematics and branch split") {
  auto k = moller_kinematics(1.0, 1.0);
  CHECK(k.branch == MollerBranch::Primary);
  CHECK(k.mu == doctest::Approx(1.0));
  // Boundary E = E'/2 goes primary: mu22p(2,1) = sqrt(1*4/(2*3)).
  k = moller_kinematics(2.0, 1.0);
  CHECK(k.branch == MollerBranch::Primary);
  CHECK(k.mu == doctest::Approx(std::sqrt(4.0 / 6.0)));
  // Secondary branch: mu22s(E',E) = mu22p(E', E'-E).
  k = moller_kinematics(2.0, 0.5);
  CHECK(k.branch == MollerBranch::Secondary);
  CHECK(k.mu == doctest::Approx(std::sqrt(1.5 * 4.0 / (2.0 * 3.5))));
  CHECK(k.mu == doctest::Approx(0.925820).epsilon(1e-6));
  // E > E' excluded.
  CHECK(moller_kinematics(1.0, 1.5).branch == MollerBranch::Excluded);
}

TEST_CASE("moller branch partition") {
  // Exactly one branch on E0 <= E <= E'; ties at E = E'/2 go primary.
  const double E0 = 0.01;
  for (int i = 1; i <= 40; ++i)
    for (int j = 1; j <= 40; ++j) {
      const double Ep = 0.05 + 2.0 * i / 40.0;
      const double E = j == 40 ? Ep : E0 + (Ep - E0) * j / 40.0;
      const auto k = moller_kinematics(Ep, E, E0);
      CHECK(k.branch != MollerBranch::Excluded);
      if (E >= Ep / 2)
        CHECK(k.branch == MollerBranch::Primary);
      else
        CHECK(k.branch == MollerBranch::Secondary);
    }
  CHECK(moller_kinematics(2.0, 1.0, 0.01).branch == MollerBranch::Primary);
}

TEST_CASE("circle average") {
  const Vec3 w = normalized(Vec3{0.3, -0.2, 0.9});
  // Constant field: exactly 2 pi.
  CHECK(circle_average([](const Vec3&) { return 1.0; }, w, 0.37) ==
        doctest::Approx(2 * M_PI).epsilon(1e-12));
  // psi(w') = w'.w integrates to 2 pi mu.
  CHECK(circle_average([&](const Vec3& wp) { return dot(wp, w); }, w, 0.5) ==
        doctest::Approx(M_PI).epsilon(1e-12));
  // Degenerate circle at mu = 1.
  CHECK(circle_average([&](const Vec3& wp) { return wp.x; }, w, 1.0) ==
        doctest::Approx(2 * M_PI * w.x).epsilon(1e-12));
  CHECK_THROWS_AS(
      circle_average([](const Vec3&) { return 1.0; }, w, 1.5),
      std::invalid_argument);
}

TEST_CASE("csda reduction of the moller kernel") {
  MollerModel zero{[](const Vec3&) { return 0.0; }, 0.1};
  auto c0 = csda_reduce_moller(zero, {0, 0, 0}, 0.5, 1.0);
  CHECK(c0.stopping_coeff == doctest::Approx(0.0));
  CHECK(c0.absorption_coeff == doctest::Approx(0.0));

  MollerModel one{[](const Vec3&) { return 1.0; }, 0.1};
  // ln 1 = 0 kills the stopping coefficient at E = 1.
  CHECK(csda_reduce_moller(one, {0, 0, 0}, 1.0, 2.0).stopping_coeff ==
        doctest::Approx(0.0).epsilon(1e-12));
  // At E = e the coefficient is sigma_hat2(e,e) = (e+1)^2/(e(e+2)).
  const double e = std::exp(1.0);
  const double expect = (e + 1) * (e + 1) / (e * (e + 2));
  CHECK(csda_reduce_moller(one, {0, 0, 0}, e, 4.0).stopping_coeff ==
        doctest::Approx(expect).epsilon(1e-9));
  CHECK_THROWS_AS(csda_reduce_moller(one, {0, 0, 0}, 0.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("restricted kernels vanish below E' = 2E") {
  MollerModel m{[](const Vec3&) { return 1.0; }, 0.3};
  auto cc = csda_reduce_moller(m, {0, 0, 0}, 0.2, 1.0, 0.01);
  const Vec3 w{0, 0, 1};
  for (double Ep : {0.21, 0.3, 0.39})
    for (double E : {0.2, 0.25}) {
      if (Ep >= 2 * E) continue;
      CHECK(cc.restricted_kernel({0, 0, 0}, w, w, Ep, E) == 0.0);
    }
  // Supported branch: secondary electrons at E' >= 2E.
  double any = 0.0;
  for (double mu = -1.0; mu <= 1.0; mu += 0.001)
    any = std::max(any, cc.restricted_kernel({0, 0, 0},
                                             {std::sqrt(1 - mu * mu), 0, mu},
                                             w, 0.9, 0.2));
  CHECK(any > 0.0);
}

TEST_CASE("restricted stopping power sums its levels") {
  auto lv = [](double s) {
    return StoppingLevel{[s](const Vec3&, double) { return s; }, 0.0};
  };
  StoppingLevel a = lv(2.0);
  a.eps = 0.5;
  auto r1 = restricted_stopping_power({a});
  CHECK(r1.S_r({0, 0, 0}, 0.3) == doctest::Approx(1.0));
  CHECK(r1.Sigma_at({0, 0, 0}, 0.3) == doctest::Approx(2.0));
  auto r0 = restricted_stopping_power({});
  CHECK(r0.S_r({0, 0, 0}, 0.3) == doctest::Approx(0.0));
  StoppingLevel b = lv(1.0);
  b.eps = 0.1;
  StoppingLevel c = lv(3.0);
  c.eps = 0.2;
  auto r2 = restricted_stopping_power({b, c});
  CHECK(r2.S_r({0, 0, 0}, 0.5) == doctest::Approx(0.7));
}
