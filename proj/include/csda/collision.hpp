#pragma once

// Discrete Schur collision operators on the phase grid: multi-species kernel
// application, exponential tilting, the exact-transpose adjoint, Schur
// row/column bounds and the accretivity margin those bounds certify.

#include <functional>
#include <memory>
#include <vector>

#include "csda/grid.hpp"
#include "csda/vec3.hpp"

namespace csda {

// sigma(x, w', w, E', E); for in-energy-group kernels the E' slot is unused
// and the E'-quadrature collapses (delta(E - E') in energy).
using KernelFn =
    std::function<double(const Vec3&, const Vec3&, const Vec3&, double, double)>;

struct KernelEntry {
  KernelFn fn;             // null means the (k -> j) channel is absent
  bool in_energy_group = false;
};

struct KernelSet {
  int species = 1;
  // sigma[k][j]: scattering from species k into species j.
  std::vector<std::vector<KernelEntry>> sigma;
  double tilt_C = 0.0;  // kernels applied as sigma * exp(C (E - E'))

  static KernelSet zero(int species);
  static KernelSet constant(int species, double s0);

  const KernelEntry& entry(int k, int j) const { return sigma[k][j]; }
  KernelEntry& entry(int k, int j) { return sigma[k][j]; }
};

// Pointwise tilted kernel set sigma_C = sigma e^{C(E-E')} (Eq. collc form).
KernelSet tilt_kernels(const KernelSet& kernels, double C);

struct ScatterData {
  // Sigma[j](x, w, E) >= 0 per species.
  std::vector<std::function<double(const Vec3&, const Vec3&, double)>> Sigma;
};

// Caches the per-x kernel matrices when they fit, so iterative solvers do
// not re-evaluate kernel closures; falls back to direct evaluation.
class KernelApplier {
 public:
  KernelApplier(const KernelSet& kernels, const PhaseGrid& grid,
                size_t tabulate_limit = size_t(1) << 22);

  // (K_j psi)(x,w,E) = sum_k sum_{w',E'} w_{w'} w_{E'} sigma_kj psi_k.
  Field apply(const Field& psi) const;
  // Exact discrete transpose (argument-swapped kernel, same weights).
  Field apply_adjoint(const Field& v) const;

  const PhaseGrid& grid() const { return grid_; }
  const KernelSet& kernels() const { return kernels_; }

 private:
  KernelSet kernels_;
  const PhaseGrid& grid_;
  bool tabulated_ = false;
  int m_ = 0;  // species * n_angular * n_energy (rows of a per-x block)
  std::vector<std::vector<double>> blocks_;  // per spatial node, row-major

  double eval(int k, int j, int ix, int ap, int a, int kp, int kE) const;
  Field apply_impl(const Field& in, bool adjoint) const;
};

Field apply_K(const KernelSet& kernels, const PhaseGrid& grid,
              const Field& psi);
Field apply_K_adjoint(const KernelSet& kernels, const PhaseGrid& grid,
                      const Field& v);

// Delta-exact Compton photon->photon application via the circle path
// integral, K11 psi = int chi11 sigma_hat11 (path integral) dE' (no
// mollifier); angular off-node values by nearest angular node.
struct ComptonModel;
Field apply_K_compton_path(const std::function<double(const Vec3&)>& sigma0,
                           const PhaseGrid& grid, const Field& psi,
                           int n_s = 64);

struct SchurBounds {
  double M1 = 0.0;        // max incoming row sum
  double M2 = 0.0;        // max outgoing column sum
  double norm_bound = 0.0;  // sqrt(M1 M2)
};

SchurBounds schur_bounds(const KernelSet& kernels, const PhaseGrid& grid);

// c = min over nodes/species of the two tilted margins
//   Sigma_j - sum_k int sigma_{jk,C} and Sigma_j - sum_k int sigma_{kj,C};
// may be negative (then the problem is outside the contraction theory).
double accretivity_margin(const ScatterData& scatter, const KernelSet& kernels,
                          double C, const PhaseGrid& grid);

// Bilinearly interpolated (E',E) table with nearest-node dependence on the
// scattering cosine; the "table:<path>" kernel of the CLI.
class TableKernel {
 public:
  TableKernel(std::vector<double> Ep, std::vector<double> E,
              std::vector<double> mu, std::vector<double> values);
  double operator()(double Ep, double E, double mu) const;

 private:
  std::vector<double> Ep_, E_, mu_, v_;
};

}  // namespace csda
