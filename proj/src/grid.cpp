#include "csda/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace csda {

namespace {
std::atomic<long> g_clip_count{0};
}

long interp_clip_count() { return g_clip_count.load(); }

void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

PhaseGrid::PhaseGrid(const Domain& domain, const GridSpec& spec)
    : domain_(domain), spec_(spec) {
  if (spec.nx < 1 || spec.n_theta < 1 || spec.n_phi < 1 || spec.n_E < 1)
    throw std::invalid_argument("grid: all node counts must be >= 1");
  if (!(spec.E0 < spec.Em))
    throw std::invalid_argument("grid: needs E0 < Em");
  if (spec.species != 1 && spec.species != 3)
    throw std::invalid_argument("grid: species count must be 1 or 3");

  // Spatial: masked midpoint lattice over the bounding box.
  Vec3 blo, bhi;
  if (domain.shape() == Domain::Shape::Ball) {
    blo = domain.center() - Vec3{1, 1, 1} * domain.radius();
    bhi = domain.center() + Vec3{1, 1, 1} * domain.radius();
  } else {
    blo = domain.lo();
    bhi = domain.hi();
  }
  const int nx = spec.nx;
  hx_ = (bhi.x - blo.x) / nx;  // bounding boxes are cubes for balls
  const double hy = (bhi.y - blo.y) / nx;
  const double hz = (bhi.z - blo.z) / nx;
  origin_ = {blo.x + 0.5 * hx_, blo.y + 0.5 * hy, blo.z + 0.5 * hz};
  lattice_.assign(static_cast<size_t>(nx) * nx * nx, -1);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j)
      for (int k = 0; k < nx; ++k) {
        const Vec3 c{origin_.x + i * hx_, origin_.y + j * hy,
                     origin_.z + k * hz};
        if (domain.contains(c)) {
          lattice_[(static_cast<size_t>(i) * nx + j) * nx + k] =
              static_cast<int>(xs_.size());
          xs_.push_back(c);
          node_ijk_.push_back((i * nx + j) * nx + k);
        }
      }
  if (xs_.empty()) throw std::invalid_argument("grid: no spatial node inside");
  wx_.assign(xs_.size(), domain.volume() / static_cast<double>(xs_.size()));

  // Angular: GL in mu x uniform midpoint in phi.
  std::vector<double> glx, glw;
  gauss_legendre(spec.n_theta, glx, glw);
  for (int i = 0; i < spec.n_theta; ++i) {
    for (int j = 0; j < spec.n_phi; ++j) {
      const double mu = glx[i];
      const double phi = 2.0 * M_PI * (j + 0.5) / spec.n_phi;
      const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
      omegas_.push_back({st * std::cos(phi), st * std::sin(phi), mu});
      mus_.push_back(mu);
      phis_.push_back(phi);
      ww_.push_back(glw[i] * 2.0 * M_PI / spec.n_phi);
    }
  }
  antipode_.assign(omegas_.size(), -1);
  if (spec.n_phi % 2 == 0) {
    for (int i = 0; i < spec.n_theta; ++i)
      for (int j = 0; j < spec.n_phi; ++j) {
        const int a = i * spec.n_phi + j;
        const int i2 = spec.n_theta - 1 - i;
        const int j2 = (j + spec.n_phi / 2) % spec.n_phi;
        antipode_[a] = i2 * spec.n_phi + j2;
      }
  }

  // Energy: uniform midpoints on [E0, Em].
  dE_ = (spec.Em - spec.E0) / spec.n_E;
  for (int k = 0; k < spec.n_E; ++k) {
    Es_.push_back(spec.E0 + (k + 0.5) * dE_);
    wE_.push_back(dE_);
  }
}

int PhaseGrid::lattice_index(int i, int j, int k) const {
  const int nx = spec_.nx;
  if (i < 0 || j < 0 || k < 0 || i >= nx || j >= nx || k >= nx) return -1;
  return lattice_[(static_cast<size_t>(i) * nx + j) * nx + k];
}

void PhaseGrid::spatial_coords(int node, int& i, int& j, int& k) const {
  const int nx = spec_.nx;
  const int packed = node_ijk_[node];
  i = packed / (nx * nx);
  j = (packed / nx) % nx;
  k = packed % nx;
}

Field& Field::operator+=(const Field& o) {
  for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
Field& Field::operator-=(const Field& o) {
  for (size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}
Field& Field::operator*=(double s) {
  for (double& v : v_) v *= s;
  return *this;
}

// --- boundary quadrature --------------------------------------------------

BoundaryField::BoundaryField(const PhaseGrid& grid, Orientation orient)
    : grid_(&grid), orient_(orient) {
  const Domain& dom = grid.domain();
  const int n = grid.spec().n_surf;
  na_ = grid.n_angular();
  nE_ = grid.n_energy();
  if (dom.shape() == Domain::Shape::Ball) {
    n_patches_ = 1;
    patch_rows_ = n;
    patch_cols_ = n;
    std::vector<double> glx, glw;
    gauss_legendre(n, glx, glw);
    const double r = dom.radius();
    row_param_ = glx;
    for (int j = 0; j < n; ++j)
      col_param_.push_back(2.0 * M_PI * (j + 0.5) / n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double mu = glx[i];
        const double phi = col_param_[j];
        const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        const Vec3 nu{st * std::cos(phi), st * std::sin(phi), mu};
        ys_.push_back(dom.center() + nu * r);
        nus_.push_back(nu);
        wsurf_.push_back(r * r * glw[i] * 2.0 * M_PI / n);
      }
  } else {
    n_patches_ = 6;
    patch_rows_ = n;
    patch_cols_ = n;
    const Vec3 lo = dom.lo(), hi = dom.hi();
    const double len[3] = {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
    // Faces ordered (axis, side): (0,-),(0,+),(1,-),(1,+),(2,-),(2,+);
    // tangential axes (axis+1)%3 rows, (axis+2)%3 cols.
    for (int axis = 0; axis < 3; ++axis)
      for (int side = 0; side < 2; ++side) {
        const int ta = (axis + 1) % 3, tb = (axis + 2) % 3;
        const double area_w = len[ta] / n * (len[tb] / n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            Vec3 y;
            y[axis] = side ? hi[axis] : lo[axis];
            y[ta] = lo[ta] + (i + 0.5) * len[ta] / n;
            y[tb] = lo[tb] + (j + 0.5) * len[tb] / n;
            Vec3 nu{};
            nu[axis] = side ? 1.0 : -1.0;
            ys_.push_back(y);
            nus_.push_back(nu);
            wsurf_.push_back(area_w);
          }
        for (int i = 0; i < n; ++i) {
          row_param_.push_back(lo[ta] + (i + 0.5) * len[ta] / n);
          col_param_.push_back(lo[tb] + (i + 0.5) * len[tb] / n);
        }
      }
  }
  const int nb = static_cast<int>(ys_.size());
  muw_.assign(static_cast<size_t>(nb) * na_, 0.0);
  tau_.assign(static_cast<size_t>(nb) * na_, 0.0);
  for (int b = 0; b < nb; ++b)
    for (int a = 0; a < na_; ++a) {
      const double mu = dot(grid.omega(a), nus_[b]);
      const bool in = orient_ == Orientation::Inflow;
      if ((in && mu < -kTangentTol) || (!in && mu > kTangentTol)) {
        muw_[b * na_ + a] = std::abs(mu);
        tau_[b * na_ + a] =
            dom.exit_distance(ys_[b], in ? grid.omega(a) : -grid.omega(a));
      }
    }
  v_.assign(static_cast<size_t>(grid.species()) * nb * na_ * nE_, 0.0);
}

void BoundaryField::fill(
    int s, const std::function<double(const Vec3&, const Vec3&, double)>& g) {
  for (int b = 0; b < n_surf(); ++b)
    for (int a = 0; a < na_; ++a)
      for (int k = 0; k < nE_; ++k)
        at(s, b, a, k) = g(ys_[b], grid_->omega(a), grid_->E(k));
}

void BoundaryField::surface_cell(const Vec3& y, int& patch, double& r,
                                 double& c) const {
  const Domain& dom = grid_->domain();
  if (dom.shape() == Domain::Shape::Ball) {
    patch = 0;
    const Vec3 d = normalized(y - dom.center());
    r = d.z;
    c = std::atan2(d.y, d.x);
    if (c < 0) c += 2.0 * M_PI;
  } else {
    // Face of the nearest axis plane.
    const Vec3 nu = dom.outward_normal(y);
    int axis = nu.x != 0 ? 0 : (nu.y != 0 ? 1 : 2);
    int side = (nu[axis] > 0) ? 1 : 0;
    patch = axis * 2 + side;
    const int ta = (axis + 1) % 3, tb = (axis + 2) % 3;
    r = y[ta];
    c = y[tb];
  }
}

namespace {
// Bracketing index and weight in a sorted parameter table (clamped).
inline void bracket(const double* tab, int n, double v, int& i0, double& t) {
  if (v <= tab[0]) {
    i0 = 0;
    t = 0.0;
    return;
  }
  if (v >= tab[n - 1]) {
    i0 = n - 2;
    t = 1.0;
    return;
  }
  int lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (tab[mid] <= v ? lo : hi) = mid;
  }
  i0 = lo;
  t = (v - tab[lo]) / (tab[lo + 1] - tab[lo]);
}
}  // namespace

int surface_weights(const BoundaryField& bf, const Vec3& yq,
                    SurfaceWeight out[4]) {
  int patch;
  double r, c;
  bf.surface_cell(yq, patch, r, c);
  const double* rows = bf.row_param_.data() + patch * bf.patch_rows_;
  const int base = patch * bf.patch_rows_ * bf.patch_cols_;
  int i0, j0, j1;
  double tr, tc;
  bracket(rows, bf.patch_rows_, r, i0, tr);
  if (bf.grid_->domain().shape() == Domain::Shape::Ball) {
    // phi wraps periodically.
    const int n = bf.patch_cols_;
    const double dphi = 2.0 * M_PI / n;
    double u = c / dphi - 0.5;
    const double fl = std::floor(u);
    j0 = static_cast<int>(fl);
    tc = u - fl;
    j1 = ((j0 + 1) % n + n) % n;
    j0 = ((j0 % n) + n) % n;
  } else {
    const double* cols = bf.col_param_.data() + patch * bf.patch_cols_;
    bracket(cols, bf.patch_cols_, c, j0, tc);
    j1 = j0 + 1;
  }
  out[0] = {base + i0 * bf.patch_cols_ + j0, (1 - tr) * (1 - tc)};
  out[1] = {base + i0 * bf.patch_cols_ + j1, (1 - tr) * tc};
  out[2] = {base + (i0 + 1) * bf.patch_cols_ + j0, tr * (1 - tc)};
  out[3] = {base + (i0 + 1) * bf.patch_cols_ + j1, tr * tc};
  return 4;
}

double BoundaryField::eval(int s, const Vec3& yq, int a, int k) const {
  SurfaceWeight w[4];
  const int n = surface_weights(*this, yq, w);
  double v = 0.0;
  for (int i = 0; i < n; ++i) v += w[i].w * at(s, w[i].node, a, k);
  return v;
}

double BoundaryField::eval_energy(int s, const Vec3& yq, int a,
                                  double E) const {
  const int nE = nE_;
  if (nE == 1) return eval(s, yq, a, 0);
  const double E_first = grid_->E(0);
  const double dE = grid_->dE();
  double u = (E - E_first) / dE;
  u = std::clamp(u, 0.0, static_cast<double>(nE - 1));
  const int k0 = std::min(static_cast<int>(u), nE - 2);
  const double t = u - k0;
  return (1 - t) * eval(s, yq, a, k0) + t * eval(s, yq, a, k0 + 1);
}

BoundaryField& BoundaryField::operator+=(const BoundaryField& o) {
  for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
BoundaryField& BoundaryField::operator*=(double s) {
  for (double& v : v_) v *= s;
  return *this;
}

// --- integration and norms -------------------------------------------------

double integrate_phase(const PhaseGrid& grid, const Field& f, int s) {
  double sum = 0.0;
  for (int ix = 0; ix < grid.n_spatial(); ++ix)
    for (int a = 0; a < grid.n_angular(); ++a)
      for (int k = 0; k < grid.n_energy(); ++k)
        sum += grid.wx(ix) * grid.ww(a) * grid.wE(k) * f.at(s, ix, a, k);
  return sum;
}

double l2_inner(const PhaseGrid& grid, const Field& a, const Field& b) {
  double sum = 0.0;
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int w = 0; w < grid.n_angular(); ++w)
        for (int k = 0; k < grid.n_energy(); ++k)
          sum += grid.wx(ix) * grid.ww(w) * grid.wE(k) * a.at(s, ix, w, k) *
                 b.at(s, ix, w, k);
  return sum;
}

double l2_norm(const PhaseGrid& grid, const Field& f) {
  return std::sqrt(std::max(0.0, l2_inner(grid, f, f)));
}

double t2_boundary_inner(const BoundaryField& a, const BoundaryField& b,
                         bool tau_weighted) {
  const PhaseGrid& g = a.grid();
  double sum = 0.0;
  for (int s = 0; s < g.species(); ++s)
    for (int bn = 0; bn < a.n_surf(); ++bn)
      for (int w = 0; w < g.n_angular(); ++w) {
        const double muw = a.mu_weight(bn, w);
        if (muw <= 0.0) continue;
        const double geom =
            a.w_surf(bn) * g.ww(w) * muw * (tau_weighted ? a.tau(bn, w) : 1.0);
        for (int k = 0; k < g.n_energy(); ++k)
          sum += geom * g.wE(k) * a.at(s, bn, w, k) * b.at(s, bn, w, k);
      }
  return sum;
}

double t2_boundary_norm(const BoundaryField& h, bool tau_weighted) {
  return std::sqrt(std::max(0.0, t2_boundary_inner(h, h, tau_weighted)));
}

TraceField make_trace_field(
    const PhaseGrid& grid,
    const std::function<double(int, const Vec3&, const Vec3&, double)>& f) {
  TraceField tf;
  tf.vol = Field(grid);
  tf.trace_minus = BoundaryField(grid, Orientation::Inflow);
  tf.trace_plus = BoundaryField(grid, Orientation::Outflow);
  for (int s = 0; s < grid.species(); ++s) {
    for (int ix = 0; ix < grid.n_spatial(); ++ix)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int k = 0; k < grid.n_energy(); ++k)
          tf.vol.at(s, ix, a, k) = f(s, grid.x(ix), grid.omega(a), grid.E(k));
    tf.trace_minus.fill(s, [&](const Vec3& y, const Vec3& w, double E) {
      return f(s, y, w, E);
    });
    tf.trace_plus.fill(s, [&](const Vec3& y, const Vec3& w, double E) {
      return f(s, y, w, E);
    });
  }
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  tf.slice_E0.assign(static_cast<size_t>(grid.species()) * nx * nw, 0.0);
  tf.slice_Em.assign(static_cast<size_t>(grid.species()) * nx * nw, 0.0);
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        const size_t id = (static_cast<size_t>(s) * nx + ix) * nw + a;
        tf.slice_E0[id] = f(s, grid.x(ix), grid.omega(a), grid.E0());
        tf.slice_Em[id] = f(s, grid.x(ix), grid.omega(a), grid.Em());
      }
  return tf;
}

double h1_norm(const PhaseGrid& grid, const TraceField& f) {
  double sum = l2_inner(grid, f.vol, f.vol);
  sum += t2_boundary_inner(f.trace_minus, f.trace_minus, false);
  sum += t2_boundary_inner(f.trace_plus, f.trace_plus, false);
  const int nx = grid.n_spatial(), nw = grid.n_angular();
  for (int s = 0; s < grid.species(); ++s)
    for (int ix = 0; ix < nx; ++ix)
      for (int a = 0; a < nw; ++a) {
        const size_t id = (static_cast<size_t>(s) * nx + ix) * nw + a;
        sum += grid.wx(ix) * grid.ww(a) *
               (f.slice_E0[id] * f.slice_E0[id] +
                f.slice_Em[id] * f.slice_Em[id]);
      }
  return std::sqrt(std::max(0.0, sum));
}

double h_norm(const PhaseGrid& grid, const Field& f, int s,
              const BoundaryField& tr_minus, const BoundaryField& tr_plus) {
  double sum = 0.0;
  for (int ix = 0; ix < grid.n_spatial(); ++ix)
    for (int w = 0; w < grid.n_angular(); ++w)
      for (int k = 0; k < grid.n_energy(); ++k)
        sum += grid.wx(ix) * grid.ww(w) * grid.wE(k) * f.at(s, ix, w, k) *
               f.at(s, ix, w, k);
  const PhaseGrid& g = grid;
  for (const BoundaryField* tr : {&tr_minus, &tr_plus})
    for (int bn = 0; bn < tr->n_surf(); ++bn)
      for (int w = 0; w < g.n_angular(); ++w) {
        const double muw = tr->mu_weight(bn, w);
        if (muw <= 0.0) continue;
        for (int k = 0; k < g.n_energy(); ++k)
          sum += tr->w_surf(bn) * g.ww(w) * muw * g.wE(k) *
                 tr->at(s, bn, w, k) * tr->at(s, bn, w, k);
      }
  return std::sqrt(std::max(0.0, sum));
}

double boundary_ray_integral(
    const Domain& domain, const PhaseGrid& grid,
    const std::function<double(const Vec3&, const Vec3&, double)>& f,
    double h_ray) {
  if (h_ray <= 0.0) h_ray = domain.diameter() / 64.0;
  BoundaryField bf(grid, Orientation::Inflow);
  double sum = 0.0;
  for (int b = 0; b < bf.n_surf(); ++b)
    for (int a = 0; a < grid.n_angular(); ++a) {
      const double muw = bf.mu_weight(b, a);
      if (muw <= 0.0) continue;
      const double tau = bf.tau(b, a);
      const int n = std::max(1, static_cast<int>(std::ceil(tau / h_ray)));
      const double dt = tau / n;
      const Vec3& w = grid.omega(a);
      for (int k = 0; k < grid.n_energy(); ++k) {
        double ray = 0.0;
        for (int m = 0; m < n; ++m)
          ray += f(bf.y(b) + w * ((m + 0.5) * dt), w, grid.E(k));
        sum += bf.w_surf(b) * grid.ww(a) * grid.wE(k) * muw * ray * dt;
      }
    }
  return sum;
}

// --- off-grid evaluation -----------------------------------------------

int spatial_weights(const PhaseGrid& grid, const Vec3& x,
                    SpatialWeight out[8]) {
  const int nx = grid.nx();
  const Vec3& o = grid.lattice_origin();
  const double h = grid.hx();
  double p[3] = {(x.x - o.x) / h, (x.y - o.y) / h, (x.z - o.z) / h};
  int base[3];
  double t[3];
  for (int d = 0; d < 3; ++d) {
    double fl = std::floor(p[d]);
    base[d] = static_cast<int>(fl);
    t[d] = p[d] - fl;
    if (base[d] < 0) {
      base[d] = 0;
      t[d] = 0.0;
    }
    if (base[d] > nx - 2) {
      base[d] = std::max(0, nx - 2);
      t[d] = 1.0;
    }
  }
  int count = 0;
  double wsum = 0.0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const int node =
            grid.lattice_index(base[0] + di, base[1] + dj, base[2] + dk);
        if (node < 0) continue;
        const double w = (di ? t[0] : 1 - t[0]) * (dj ? t[1] : 1 - t[1]) *
                         (dk ? t[2] : 1 - t[2]);
        if (w == 0.0) continue;
        out[count++] = {node, w};
        wsum += w;
      }
  if (wsum > 1e-14) {
    for (int i = 0; i < count; ++i) out[i].w /= wsum;
    return count;
  }
  // Entire stencil cube is outside the mask: fall back to the nearest node.
  double best = std::numeric_limits<double>::infinity();
  int best_node = 0;
  for (int i = 0; i < grid.n_spatial(); ++i) {
    const double d2 = dot(grid.x(i) - x, grid.x(i) - x);
    if (d2 < best) {
      best = d2;
      best_node = i;
    }
  }
  out[0] = {best_node, 1.0};
  return 1;
}

double eval_spatial(const PhaseGrid& grid, const Field& f, int s,
                    const Vec3& x, int iw, int iE) {
  SpatialWeight w[8];
  const int n = spatial_weights(grid, x, w);
  double v = 0.0;
  for (int i = 0; i < n; ++i) v += w[i].w * f.at(s, w[i].node, iw, iE);
  return v;
}

namespace {
// Fritsch-Carlson limited slope at node k of the 1-D sequence y (spacing h).
inline double fc_slope(const std::vector<double>& y, int k, double h) {
  const int n = static_cast<int>(y.size());
  if (n < 2) return 0.0;
  if (k == 0) return (y[1] - y[0]) / h;
  if (k == n - 1) return (y[n - 1] - y[n - 2]) / h;
  const double dl = (y[k] - y[k - 1]) / h;
  const double dr = (y[k + 1] - y[k]) / h;
  if (dl * dr <= 0.0) return 0.0;
  const double m = 0.5 * (dl + dr);
  // Keep within 3x the smaller secant (monotonicity region).
  const double lim = 3.0 * std::min(std::abs(dl), std::abs(dr));
  return std::copysign(std::min(std::abs(m), lim), m);
}
}  // namespace

double eval_spatial_energy_linear(const PhaseGrid& grid, const Field& f,
                                  int s, const Vec3& x, int iw, double E) {
  SpatialWeight w[8];
  const int n = spatial_weights(grid, x, w);
  const int nE = grid.n_energy();
  if (nE == 1) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += w[i].w * f.at(s, w[i].node, iw, 0);
    return v;
  }
  double u = (E - grid.E(0)) / grid.dE();
  u = std::clamp(u, 0.0, static_cast<double>(nE - 1));
  const int k0 = std::min(static_cast<int>(u), nE - 2);
  const double t = u - k0;
  double v0 = 0.0, v1 = 0.0;
  for (int i = 0; i < n; ++i) {
    v0 += w[i].w * f.at(s, w[i].node, iw, k0);
    v1 += w[i].w * f.at(s, w[i].node, iw, k0 + 1);
  }
  return (1 - t) * v0 + t * v1;
}

double eval_spatial_energy(const PhaseGrid& grid, const Field& f, int s,
                           const Vec3& x, int iw, double E) {
  const int nE = grid.n_energy();
  if (nE == 1) return eval_spatial(grid, f, s, x, iw, 0);
  const double Ef = grid.E(0), h = grid.dE();
  double u = (E - Ef) / h;
  u = std::clamp(u, 0.0, static_cast<double>(nE - 1));
  const int k0 = std::min(static_cast<int>(u), nE - 2);
  const double t = u - k0;
  // Gather the values needed for a local cubic Hermite in energy.
  const int lo = std::max(0, k0 - 1), hi = std::min(nE - 1, k0 + 2);
  std::vector<double> ys(hi - lo + 1);
  for (int k = lo; k <= hi; ++k)
    ys[k - lo] = eval_spatial(grid, f, s, x, iw, k);
  const double y0 = ys[k0 - lo], y1 = ys[k0 + 1 - lo];
  const double m0 = fc_slope(ys, k0 - lo, h), m1 = fc_slope(ys, k0 + 1 - lo, h);
  const double t2 = t * t, t3 = t2 * t;
  double v = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 +
             (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
  if (v < 0.0 && v > -1e-12) {
    v = 0.0;
    g_clip_count.fetch_add(1, std::memory_order_relaxed);
  }
  return v;
}

}  // namespace csda
