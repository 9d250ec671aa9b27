#include "csda/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csda {

Domain Domain::ball(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be > 0");
  Domain d;
  d.shape_ = Shape::Ball;
  d.center_ = center;
  d.radius_ = radius;
  d.diameter_ = 2.0 * radius;
  return d;
}

Domain Domain::box(const Vec3& lo, const Vec3& hi) {
  for (int i = 0; i < 3; ++i)
    if (!(lo[i] < hi[i])) throw std::invalid_argument("box needs lo < hi");
  Domain d;
  d.shape_ = Shape::Box;
  d.lo_ = lo;
  d.hi_ = hi;
  d.diameter_ = norm(hi - lo);
  return d;
}

double Domain::volume() const {
  if (shape_ == Shape::Ball)
    return 4.0 / 3.0 * M_PI * radius_ * radius_ * radius_;
  return (hi_.x - lo_.x) * (hi_.y - lo_.y) * (hi_.z - lo_.z);
}

bool Domain::contains(const Vec3& x, double tol) const {
  if (shape_ == Shape::Ball) return norm(x - center_) <= radius_ + tol;
  for (int i = 0; i < 3; ++i)
    if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
  return true;
}

Vec3 Domain::outward_normal(const Vec3& y) const {
  if (shape_ == Shape::Ball) return normalized(y - center_);
  // Nearest face, smallest axis index wins ties.
  int best_axis = 0;
  int best_side = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double dlo = std::abs(y[i] - lo_[i]);
    const double dhi = std::abs(y[i] - hi_[i]);
    if (dlo < best_dist) {
      best_dist = dlo;
      best_axis = i;
      best_side = -1;
    }
    if (dhi < best_dist) {
      best_dist = dhi;
      best_axis = i;
      best_side = +1;
    }
  }
  Vec3 nu{};
  nu[best_axis] = static_cast<double>(best_side);
  return nu;
}

double Domain::exit_distance(const Vec3& x, const Vec3& d) const {
  if (shape_ == Shape::Ball) {
    const Vec3 p = x - center_;
    const double b = dot(p, d);
    const double rad = b * b + radius_ * radius_ - dot(p, p);
    const double s = -b + std::sqrt(std::max(rad, 0.0));
    return std::max(s, 0.0);
  }
  double s = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (d[i] > kTangentTol) {
      s = std::min(s, (hi_[i] - x[i]) / d[i]);
    } else if (d[i] < -kTangentTol) {
      s = std::min(s, (lo_[i] - x[i]) / d[i]);
    }
  }
  if (!std::isfinite(s)) return 0.0;
  return std::max(s, 0.0);
}

Vec3 Domain::project_to_boundary(const Vec3& x) const {
  if (shape_ == Shape::Ball) return center_ + normalized(x - center_) * radius_;
  // Clamp into the box, then push to the nearest face.
  Vec3 p = x;
  for (int i = 0; i < 3; ++i) p[i] = std::clamp(p[i], lo_[i], hi_[i]);
  int best_axis = 0;
  double best_val = lo_[0];
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(p[i] - lo_[i]) < best_dist) {
      best_dist = std::abs(p[i] - lo_[i]);
      best_axis = i;
      best_val = lo_[i];
    }
    if (std::abs(p[i] - hi_[i]) < best_dist) {
      best_dist = std::abs(p[i] - hi_[i]);
      best_axis = i;
      best_val = hi_[i];
    }
  }
  p[best_axis] = best_val;
  return p;
}

double escape_time(const Domain& domain, const Vec3& x, const Vec3& omega) {
  const double tol = 1e-9 * domain.diameter();
  if (!domain.contains(x, tol))
    throw std::invalid_argument("escape_time: point outside the closure of G");
  if (std::abs(norm(omega) - 1.0) > 1e-9)
    throw std::invalid_argument("escape_time: direction must be unit length");
  return domain.exit_distance(x, -omega);
}

Orientation classify_boundary(const Domain& domain, const Vec3& y,
                              const Vec3& omega) {
  const double mu = dot(omega, domain.outward_normal(y));
  if (mu < -kTangentTol) return Orientation::Inflow;
  if (mu > kTangentTol) return Orientation::Outflow;
  return Orientation::Tangent;
}

ChordResult chord_length(const Domain& domain, const Vec3& y,
                         const Vec3& omega) {
  const Orientation o = classify_boundary(domain, y, omega);
  if (o == Orientation::Tangent) return {0.0, true};
  if (o == Orientation::Inflow) return {domain.exit_distance(y, omega), false};
  return {domain.exit_distance(y, -omega), false};
}

}  // namespace csda
