#pragma once

// Phase-space product grids over G x S x I, discrete flux fields, boundary
// quadrature with the |w.nu| measure, and the integrals/norms the estimates
// and acceptance checks are stated in.
//
// Quadrature choices:
//   space   - tensor midpoint over the bounding box, cells masked to the
//             domain, weights renormalized to the exact volume
//   angle   - Gauss-Legendre in cos(theta) x uniform midpoint in phi
//   energy  - composite midpoint on uniform nodes in [E0, Em]
//   surface - ball: Gauss-Legendre in cos(theta_s) x uniform phi_s;
//             box: per-face tensor midpoint

#include <cstdint>
#include <functional>
#include <vector>

#include "csda/geometry.hpp"
#include "csda/vec3.hpp"

namespace csda {

struct GridSpec {
  int nx = 8;       // spatial cells per axis of the bounding box
  int n_theta = 8;  // Gauss-Legendre nodes in cos(theta)
  int n_phi = 16;   // uniform nodes in phi (even keeps S closed under w -> -w)
  int n_E = 8;      // energy nodes
  double E0 = 0.01;
  double Em = 1.0;
  int species = 1;
  int n_surf = 12;  // surface nodes per parametric axis (per face for boxes)
};

// 1-D Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

class PhaseGrid {
 public:
  PhaseGrid(const Domain& domain, const GridSpec& spec);

  const Domain& domain() const { return domain_; }
  const GridSpec& spec() const { return spec_; }

  int n_spatial() const { return static_cast<int>(xs_.size()); }
  int n_angular() const { return static_cast<int>(omegas_.size()); }
  int n_energy() const { return static_cast<int>(Es_.size()); }
  int species() const { return spec_.species; }
  // Phase nodes per species.
  int64_t phase_size() const {
    return int64_t(n_spatial()) * n_angular() * n_energy();
  }
  int64_t total_size() const { return phase_size() * species(); }

  const Vec3& x(int i) const { return xs_[i]; }
  double wx(int i) const { return wx_[i]; }
  const Vec3& omega(int a) const { return omegas_[a]; }
  double mu(int a) const { return mus_[a]; }
  double phi_angle(int a) const { return phis_[a]; }
  double ww(int a) const { return ww_[a]; }
  double E(int k) const { return Es_[k]; }
  double wE(int k) const { return wE_[k]; }
  double E0() const { return spec_.E0; }
  double Em() const { return spec_.Em; }
  double dE() const { return dE_; }

  // Index of the angular node -w (grids are closed under the antipode when
  // n_phi is even).
  int antipode(int a) const { return antipode_[a]; }
  // Index of the energy node E0 + Em - E(k) on the uniform midpoint grid.
  int energy_mirror(int k) const { return n_energy() - 1 - k; }

  // Spatial lattice bookkeeping for interpolation/stencils: node index of
  // lattice cell (i,j,k), or -1 if the cell center is outside the domain.
  int lattice_index(int i, int j, int k) const;
  int nx() const { return spec_.nx; }
  double hx() const { return hx_; }
  const Vec3& lattice_origin() const { return origin_; }  // center of cell 0
  void spatial_coords(int node, int& i, int& j, int& k) const;

 private:
  Domain domain_;
  GridSpec spec_;
  std::vector<Vec3> xs_;
  std::vector<double> wx_;
  std::vector<Vec3> omegas_;
  std::vector<double> mus_, phis_, ww_;
  std::vector<int> antipode_;
  std::vector<double> Es_, wE_;
  std::vector<int> lattice_;   // nx^3 cell -> node index or -1
  std::vector<int> node_ijk_;  // node -> packed lattice coords
  double hx_ = 0.0, dE_ = 0.0;
  Vec3 origin_{};
};

// Multi-species flux values indexed (species, spatial, angular, energy).
class Field {
 public:
  Field() = default;
  explicit Field(const PhaseGrid& grid)
      : ns_(grid.species()),
        nx_(grid.n_spatial()),
        nw_(grid.n_angular()),
        nE_(grid.n_energy()),
        v_(static_cast<size_t>(grid.total_size()), 0.0) {}

  double& at(int s, int ix, int iw, int iE) { return v_[idx(s, ix, iw, iE)]; }
  double at(int s, int ix, int iw, int iE) const {
    return v_[idx(s, ix, iw, iE)];
  }
  size_t idx(int s, int ix, int iw, int iE) const {
    return ((static_cast<size_t>(s) * nx_ + ix) * nw_ + iw) * nE_ + iE;
  }

  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }
  size_t size() const { return v_.size(); }
  int species() const { return ns_; }

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);

 private:
  int ns_ = 0, nx_ = 0, nw_ = 0, nE_ = 0;
  std::vector<double> v_;
};

struct SpatialWeight {
  int node;
  double w;
};
struct SurfaceWeight {
  int node;
  double w;
};

// Values on boundary quadrature nodes (y, w, E) of one orientation. The
// surface nodes form a structured patch grid so data can be interpolated at
// ray-backtrace points; values are stored on the full surface lattice and the
// orientation mask selects the nodes that carry measure.
class BoundaryField {
 public:
  BoundaryField() = default;
  BoundaryField(const PhaseGrid& grid, Orientation orient);

  Orientation orientation() const { return orient_; }
  const PhaseGrid& grid() const { return *grid_; }

  int n_surf() const { return static_cast<int>(ys_.size()); }
  const Vec3& y(int b) const { return ys_[b]; }
  const Vec3& nu(int b) const { return nus_[b]; }
  double w_surf(int b) const { return wsurf_[b]; }

  // |w.nu| at (surface b, angular a); 0 for masked (wrong-orientation or
  // tangent) pairs.
  double mu_weight(int b, int a) const { return muw_[b * na_ + a]; }
  bool active(int b, int a) const { return muw_[b * na_ + a] > 0.0; }
  // Chord length tau through the domain from (y_b, w_a).
  double tau(int b, int a) const { return tau_[b * na_ + a]; }

  double& at(int s, int b, int a, int k) { return v_[idx(s, b, a, k)]; }
  double at(int s, int b, int a, int k) const { return v_[idx(s, b, a, k)]; }
  size_t idx(int s, int b, int a, int k) const {
    return ((static_cast<size_t>(s) * ys_.size() + b) * na_ + a) * nE_ + k;
  }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  // Fill from a closure g(y, w, E) sampled on the full surface lattice.
  void fill(int s,
            const std::function<double(const Vec3&, const Vec3&, double)>& g);

  // Interpolated surface value at an arbitrary boundary point for angular
  // node a and energy node k (bilinear in the patch parameters).
  double eval(int s, const Vec3& y, int a, int k) const;
  // Same with linear interpolation in (off-grid) energy.
  double eval_energy(int s, const Vec3& y, int a, double E) const;

  BoundaryField& operator+=(const BoundaryField& o);
  BoundaryField& operator*=(double s);

 private:
  const PhaseGrid* grid_ = nullptr;
  Orientation orient_ = Orientation::Inflow;
  int na_ = 0, nE_ = 0;
  std::vector<Vec3> ys_, nus_;
  std::vector<double> wsurf_;
  std::vector<double> muw_, tau_;
  std::vector<double> v_;
  // Patch structure: ball has one (n_surf x n_surf) chart, box six faces.
  int patch_rows_ = 0, patch_cols_ = 0, n_patches_ = 0;
  std::vector<double> row_param_, col_param_;  // per-patch parameter tables

  void surface_cell(const Vec3& y, int& patch, double& r, double& c) const;
  friend int surface_weights(const BoundaryField&, const Vec3&,
                             SurfaceWeight[4]);
};

// --- integration and norms ---------------------------------------------

// Quadrature of one species component over G x S x I.
double integrate_phase(const PhaseGrid& grid, const Field& f, int s = 0);

// L2(G x S x I) norm over all species.
double l2_norm(const PhaseGrid& grid, const Field& f);
double l2_inner(const PhaseGrid& grid, const Field& a, const Field& b);

// sqrt( sum w |w.nu| [tau] h^2 ) over the active boundary nodes.
double t2_boundary_norm(const BoundaryField& h, bool tau_weighted);
double t2_boundary_inner(const BoundaryField& a, const BoundaryField& b,
                         bool tau_weighted);

// Discrete field together with its boundary traces and E-endpoint slices;
// the data the H1 norm and the bilinear forms are stated on.
struct TraceField {
  Field vol;
  BoundaryField trace_minus, trace_plus;
  std::vector<double> slice_E0, slice_Em;  // (species, spatial, angular)
  double& slice0(int s, int ix, int iw, int nx, int nw) {
    return slice_E0[(static_cast<size_t>(s) * nx + ix) * nw + iw];
  }
};

TraceField make_trace_field(
    const PhaseGrid& grid,
    const std::function<double(int, const Vec3&, const Vec3&, double)>& f);

// sqrt(|psi|_L2^2 + |gamma(psi)|_T2(Gamma)^2 + |psi(.,.,E0)|^2 + |psi(.,.,Em)|^2)
double h1_norm(const PhaseGrid& grid, const TraceField& f);

// Photon-species variant without the endpoint slices (the H norm).
double h_norm(const PhaseGrid& grid, const Field& f, int s,
              const BoundaryField& tr_minus, const BoundaryField& tr_plus);

// Ray-parametrized integral over inflow chords,
//   int_{Gamma_-} int_0^{tau_-} f(y + t w, w, E) |w.nu| dt dsigma dw dE,
// the change-of-variables mate of integrate_phase.
double boundary_ray_integral(
    const Domain& domain, const PhaseGrid& grid,
    const std::function<double(const Vec3&, const Vec3&, double)>& f,
    double h_ray = 0.0);

// --- off-grid evaluation ------------------------------------------------

// The (spatial node, weight) pairs of the masked trilinear rule at x;
// weights sum to 1. Returns the pair count (1..8).
int spatial_weights(const PhaseGrid& grid, const Vec3& x,
                    SpatialWeight out[8]);

// The (surface node, weight) pairs of the bilinear patch rule at y.
int surface_weights(const BoundaryField& bf, const Vec3& y,
                    SurfaceWeight out[4]);

// Trilinear spatial interpolation of one (species, angular, energy) slice,
// masked to in-domain lattice nodes with weight renormalization.
double eval_spatial(const PhaseGrid& grid, const Field& f, int s,
                    const Vec3& x, int iw, int iE);

// Monotone-cubic (Fritsch-Carlson) interpolation in energy on top of the
// trilinear spatial rule; clips tiny negative undershoot to zero.
double eval_spatial_energy(const PhaseGrid& grid, const Field& f, int s,
                           const Vec3& x, int iw, double E);

// Linear-in-energy variant; exactly linear in the field values (the solver
// and its dense oracle need a strictly linear discrete operator) and
// positivity-preserving.
double eval_spatial_energy_linear(const PhaseGrid& grid, const Field& f,
                                  int s, const Vec3& x, int iw, double E);

}  // namespace csda
