#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "csda/geometry.hpp"

using namespace csda;

namespace {

// Bisection oracle for the ball exit: smallest s > 0 with |x + s d| = r.
double ball_exit_bisection(const Vec3& c, double r, const Vec3& x,
                           const Vec3& d) {
  double lo = 0.0, hi = 4.0 * r;
  auto inside = [&](double s) { return norm(x + d * s - c) < r; };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v{n(rng), n(rng), n(rng)};
  return normalized(v);
}

}  // namespace

TEST_CASE("escape time on the unit ball") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  CHECK(escape_time(ball, {0, 0, 0}, {1, 0, 0}) == doctest::Approx(1.0));
  // Ball formula t = <x,w> + sqrt(<x,w>^2 + r^2 - |x|^2).
  CHECK(escape_time(ball, {0.5, 0, 0}, {1, 0, 0}) == doctest::Approx(1.5));
  // Inflow boundary point: continuous extension is 0.
  CHECK(escape_time(ball, {-1, 0, 0}, {1, 0, 0}) == doctest::Approx(0.0));
}

TEST_CASE("escape time agrees with bisection on random rays") {
  const Domain ball = Domain::ball({0.2, -0.1, 0.3}, 0.7);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 50; ++i) {
    Vec3 x{0.2 + 0.7 * u(rng), -0.1 + 0.7 * u(rng), 0.3 + 0.7 * u(rng)};
    if (!ball.contains(x)) continue;
    const Vec3 w = random_unit(rng);
    const double t = escape_time(ball, x, w);
    const double t_ref = ball_exit_bisection({0.2, -0.1, 0.3}, 0.7, x, -w);
    CHECK(t == doctest::Approx(t_ref).epsilon(1e-8));
  }
}

TEST_CASE("escape time rejects bad input") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  CHECK_THROWS_AS(escape_time(ball, {3, 0, 0}, {1, 0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(escape_time(ball, {0, 0, 0}, {2, 0, 0}),
                  std::invalid_argument);
}

TEST_CASE("chord lengths") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  // tau_+ = 2 |<y,w>| on the ball.
  auto out = chord_length(ball, {1, 0, 0}, {1, 0, 0});
  CHECK(!out.tangent);
  CHECK(out.length == doctest::Approx(2.0));
  auto in = chord_length(ball, {-1, 0, 0}, {1, 0, 0});
  CHECK(in.length == doctest::Approx(2.0));
  const Domain box = Domain::box({0, 0, 0}, {1, 1, 1});
  auto bx = chord_length(box, {0, 0.5, 0.5}, {1, 0, 0});
  CHECK(bx.length == doctest::Approx(1.0));
  auto tang = chord_length(ball, {1, 0, 0}, {0, 1, 0});
  CHECK(tang.tangent);
}

TEST_CASE("boundary classification") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  CHECK(classify_boundary(ball, {1, 0, 0}, {1, 0, 0}) ==
        Orientation::Outflow);
  CHECK(classify_boundary(ball, {1, 0, 0}, {-1, 0, 0}) ==
        Orientation::Inflow);
  CHECK(classify_boundary(ball, {1, 0, 0}, {0, 1, 0}) ==
        Orientation::Tangent);
}

TEST_CASE("backtrace point lands on the boundary as inflow") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const Domain& dom :
       {Domain::ball({0, 0, 0}, 1.0), Domain::box({-1, -1, -1}, {1, 1, 1})}) {
    int checked = 0;
    for (int i = 0; i < 200 && checked < 50; ++i) {
      const Vec3 x{0.9 * u(rng), 0.9 * u(rng), 0.9 * u(rng)};
      if (!dom.contains(x)) continue;
      const Vec3 w = random_unit(rng);
      const double t = escape_time(dom, x, w);
      const Vec3 y = x - w * t;
      const Vec3 proj = dom.project_to_boundary(y);
      CHECK(norm(y - proj) <= 1e-9 * dom.diameter());
      const Orientation o = classify_boundary(dom, y, w);
      if (o == Orientation::Tangent) continue;  // measure-zero, skipped
      CHECK(o == Orientation::Inflow);
      ++checked;
    }
    CHECK(checked >= 40);
  }
}

TEST_CASE("chord identity tau_-(y,w) = tau_+(y + tau_- w, w)") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const Domain& dom :
       {Domain::ball({0, 0, 0}, 1.0), Domain::box({-1, -1, -1}, {1, 1, 1})}) {
    int checked = 0;
    for (int i = 0; i < 400 && checked < 50; ++i) {
      const Vec3 x{0.9 * u(rng), 0.9 * u(rng), 0.9 * u(rng)};
      if (!dom.contains(x)) continue;
      const Vec3 w = random_unit(rng);
      const Vec3 y = x - w * escape_time(dom, x, w);
      if (classify_boundary(dom, y, w) != Orientation::Inflow) continue;
      const auto tm = chord_length(dom, y, w);
      const Vec3 yp = y + w * tm.length;
      if (classify_boundary(dom, yp, w) != Orientation::Outflow) continue;
      const auto tp = chord_length(dom, yp, w);
      CHECK(tm.length == doctest::Approx(tp.length).epsilon(1e-9));
      CHECK(tm.length <= dom.diameter() * (1 + 1e-12));
      // t(y + s w, w) = s along the chord.
      const double s = 0.37 * tm.length;
      if (s > 0) {
        CHECK(escape_time(dom, y + w * s, w) ==
              doctest::Approx(s).epsilon(1e-9));
      }
      ++checked;
    }
    CHECK(checked >= 40);
  }
}

TEST_CASE("continuity of the escape time toward inflow points") {
  const Domain ball = Domain::ball({0, 0, 0}, 1.0);
  const Vec3 y{-1, 0, 0};
  const Vec3 w{1, 0, 0};
  double prev = 1.0;
  for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double t = escape_time(ball, y + w * eps, w);
    CHECK(t < prev);
    prev = t;
  }
  CHECK(prev <= 1e-7);
}
