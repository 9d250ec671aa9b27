#pragma once

// Convex solids (ball, axis-aligned box) with the ray-exit queries the
// transport solvers are built on: escape times t(x,w), boundary-to-boundary
// chord lengths tau_-/tau_+, outward normals and inflow/outflow
// classification of boundary phase points.

#include <stdexcept>
#include <string>

#include "csda/vec3.hpp"

namespace csda {

enum class Orientation { Inflow, Outflow, Tangent };

class Domain {
 public:
  enum class Shape { Ball, Box };

  static Domain ball(const Vec3& center, double radius);
  static Domain box(const Vec3& lo, const Vec3& hi);

  Shape shape() const { return shape_; }
  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }
  const Vec3& lo() const { return lo_; }
  const Vec3& hi() const { return hi_; }

  double diameter() const { return diameter_; }
  double volume() const;

  bool contains(const Vec3& x, double tol = 0.0) const;

  // Unit outward normal at a boundary point. Box edges/corners take the
  // nearest face, ties broken by smallest axis index (measure zero).
  Vec3 outward_normal(const Vec3& y) const;

  // Distance to the boundary from x (in the closure) along direction d,
  // i.e. inf{s > 0 : x + s d not in G}.
  double exit_distance(const Vec3& x, const Vec3& d) const;

  // Nearest boundary point (used for diagnostics and tests).
  Vec3 project_to_boundary(const Vec3& x) const;

 private:
  Shape shape_ = Shape::Ball;
  Vec3 center_{};
  double radius_ = 1.0;
  Vec3 lo_{}, hi_{};
  double diameter_ = 2.0;
};

// Escape time t(x,w): distance traveled backward along -w from x in the
// closure of G to the boundary. Zero for inflow boundary points, the full
// chord tau_+ for outflow ones (the continuous extension).
double escape_time(const Domain& domain, const Vec3& x, const Vec3& omega);

// Boundary classification of (y,w) by the sign of w.nu(y).
Orientation classify_boundary(const Domain& domain, const Vec3& y,
                              const Vec3& omega);

struct ChordResult {
  double length = 0.0;
  bool tangent = false;
};

// Chord length from a boundary point: tau_-(y,w) for inflow pairs (forward
// along +w), tau_+(y,w) for outflow pairs (backward along -w). Tangent pairs
// are flagged and carry length 0; callers skip them.
ChordResult chord_length(const Domain& domain, const Vec3& y,
                         const Vec3& omega);

constexpr double kTangentTol = 1e-12;

}  // namespace csda
