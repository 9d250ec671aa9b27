#include "csda/collision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csda/parallel.hpp"
#include "csda/xsection.hpp"

namespace csda {

KernelSet KernelSet::zero(int species) {
  KernelSet ks;
  ks.species = species;
  ks.sigma.assign(species, std::vector<KernelEntry>(species));
  return ks;
}

KernelSet KernelSet::constant(int species, double s0) {
  KernelSet ks = zero(species);
  for (int k = 0; k < species; ++k)
    for (int j = 0; j < species; ++j)
      ks.sigma[k][j].fn = [s0](const Vec3&, const Vec3&, const Vec3&, double,
                               double) { return s0; };
  return ks;
}

KernelSet tilt_kernels(const KernelSet& kernels, double C) {
  KernelSet out = kernels;
  out.tilt_C = kernels.tilt_C + C;
  return out;
}

KernelApplier::KernelApplier(const KernelSet& kernels, const PhaseGrid& grid,
                             size_t tabulate_limit)
    : kernels_(kernels), grid_(grid) {
  m_ = grid.species() * grid.n_angular() * grid.n_energy();
  const size_t block = static_cast<size_t>(m_) * m_;
  if (block * grid.n_spatial() <= tabulate_limit) {
    tabulated_ = true;
    blocks_.resize(grid.n_spatial());
    const int nw = grid.n_angular(), nE = grid.n_energy();
    parallel_for(0, grid.n_spatial(), [&](int ix) {
      std::vector<double>& B = blocks_[ix];
      B.assign(block, 0.0);
      for (int j = 0; j < grid.species(); ++j)
        for (int a = 0; a < nw; ++a)
          for (int kE = 0; kE < nE; ++kE) {
            const int row = (j * nw + a) * nE + kE;
            for (int k = 0; k < grid.species(); ++k) {
              const KernelEntry& e = kernels_.entry(k, j);
              if (!e.fn) continue;
              for (int ap = 0; ap < nw; ++ap) {
                if (e.in_energy_group) {
                  const int col = (k * nw + ap) * nE + kE;
                  B[static_cast<size_t>(row) * m_ + col] +=
                      grid.ww(ap) * e.fn(grid.x(ix), grid.omega(ap),
                                         grid.omega(a), grid.E(kE),
                                         grid.E(kE));
                } else {
                  for (int kp = 0; kp < nE; ++kp) {
                    const int col = (k * nw + ap) * nE + kp;
                    double s = e.fn(grid.x(ix), grid.omega(ap), grid.omega(a),
                                    grid.E(kp), grid.E(kE));
                    if (kernels_.tilt_C != 0.0)
                      s *= std::exp(kernels_.tilt_C *
                                    (grid.E(kE) - grid.E(kp)));
                    B[static_cast<size_t>(row) * m_ + col] +=
                        grid.ww(ap) * grid.wE(kp) * s;
                  }
                }
              }
            }
          }
    });
  }
}

double KernelApplier::eval(int k, int j, int ix, int ap, int a, int kp,
                           int kE) const {
  const KernelEntry& e = kernels_.entry(k, j);
  if (!e.fn) return 0.0;
  double s = e.fn(grid_.x(ix), grid_.omega(ap), grid_.omega(a), grid_.E(kp),
                  grid_.E(kE));
  if (!e.in_energy_group && kernels_.tilt_C != 0.0)
    s *= std::exp(kernels_.tilt_C * (grid_.E(kE) - grid_.E(kp)));
  return s;
}

Field KernelApplier::apply_impl(const Field& in, bool adjoint) const {
  Field out(grid_);
  const int nw = grid_.n_angular(), nE = grid_.n_energy();
  const int ns = grid_.species();
  parallel_for(0, grid_.n_spatial(), [&](int ix) {
    if (tabulated_) {
      const std::vector<double>& B = blocks_[ix];
      for (int n = 0; n < m_; ++n) {
        double acc = 0.0;
        if (!adjoint) {
          const double* br = B.data() + static_cast<size_t>(n) * m_;
          for (int col = 0; col < m_; ++col) {
            const int k = col / (nw * nE);
            const int rest = col % (nw * nE);
            acc += br[col] * in.at(k, ix, rest / nE, rest % nE);
          }
        } else {
          // W-weighted transpose of the tabulated block:
          //   (K* v)_n = (1 / (w_w(n) w_E(n))) sum_r B[r,n] w_w(r) w_E(r) v_r,
          // which reduces to the argument-swapped kernel with the same
          // quadrature weights for both full and in-energy-group entries.
          for (int r = 0; r < m_; ++r) {
            const int k = r / (nw * nE);
            const int rest = r % (nw * nE);
            const int ar = rest / nE, kr = rest % nE;
            acc += B[static_cast<size_t>(r) * m_ + n] * grid_.ww(ar) *
                   grid_.wE(kr) * in.at(k, ix, ar, kr);
          }
          const int rest = n % (nw * nE);
          acc /= grid_.ww(rest / nE) * grid_.wE(rest % nE);
        }
        const int j = n / (nw * nE);
        const int rest = n % (nw * nE);
        out.at(j, ix, rest / nE, rest % nE) = acc;
      }
    } else {
      for (int j = 0; j < ns; ++j)
        for (int a = 0; a < nw; ++a)
          for (int kE = 0; kE < nE; ++kE) {
            double acc = 0.0;
            for (int k = 0; k < ns; ++k) {
              const KernelEntry& e =
                  adjoint ? kernels_.entry(j, k) : kernels_.entry(k, j);
              if (!e.fn) continue;
              for (int ap = 0; ap < nw; ++ap) {
                if (e.in_energy_group) {
                  const double s =
                      adjoint ? eval(j, k, ix, a, ap, kE, kE)
                              : eval(k, j, ix, ap, a, kE, kE);
                  acc += grid_.ww(ap) * s * in.at(k, ix, ap, kE);
                } else {
                  for (int kp = 0; kp < nE; ++kp) {
                    const double s =
                        adjoint ? eval(j, k, ix, a, ap, kE, kp)
                                : eval(k, j, ix, ap, a, kp, kE);
                    acc += grid_.ww(ap) * grid_.wE(kp) * s *
                           in.at(k, ix, ap, kp);
                  }
                }
              }
            }
            if (!std::isfinite(acc))
              throw std::runtime_error("apply_K: non-finite kernel value");
            out.at(j, ix, a, kE) = acc;
          }
    }
  });
  return out;
}

Field KernelApplier::apply(const Field& psi) const {
  return apply_impl(psi, false);
}

Field KernelApplier::apply_adjoint(const Field& v) const {
  return apply_impl(v, true);
}

Field apply_K(const KernelSet& kernels, const PhaseGrid& grid,
              const Field& psi) {
  return KernelApplier(kernels, grid, 0).apply(psi);
}

Field apply_K_adjoint(const KernelSet& kernels, const PhaseGrid& grid,
                      const Field& v) {
  return KernelApplier(kernels, grid, 0).apply_adjoint(v);
}

Field apply_K_compton_path(const std::function<double(const Vec3&)>& sigma0,
                           const PhaseGrid& grid, const Field& psi,
                           int n_s) {
  Field out(grid);
  // Nearest angular node lookup for circle samples.
  const auto nearest = [&grid](const Vec3& w) {
    int best = 0;
    double bd = -2.0;
    for (int a = 0; a < grid.n_angular(); ++a) {
      const double d = dot(w, grid.omega(a));
      if (d > bd) {
        bd = d;
        best = a;
      }
    }
    return best;
  };
  parallel_for(0, grid.n_spatial(), [&](int ix) {
    const double s0 = sigma0 ? sigma0(grid.x(ix)) : 0.0;
    if (s0 == 0.0) return;
    for (int a = 0; a < grid.n_angular(); ++a)
      for (int kE = 0; kE < grid.n_energy(); ++kE) {
        double acc = 0.0;
        for (int kp = 0; kp < grid.n_energy(); ++kp) {
          const ComptonKinematics kin =
              compton_kinematics(grid.E(kp), grid.E(kE), grid.E0());
          if (!kin.chi || std::abs(kin.mu) > 1.0) continue;
          const double path = circle_average(
              [&](const Vec3& w) { return psi.at(0, ix, nearest(w), kp); },
              grid.omega(a), kin.mu, n_s);
          acc += grid.wE(kp) * s0 * kin.sigma_hat * path;
        }
        out.at(0, ix, a, kE) = acc;
      }
  });
  return out;
}

SchurBounds schur_bounds(const KernelSet& kernels, const PhaseGrid& grid) {
  SchurBounds b;
  for (int ix = 0; ix < grid.n_spatial(); ++ix)
    for (int j = 0; j < kernels.species; ++j)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int kE = 0; kE < grid.n_energy(); ++kE) {
          double in_sum = 0.0, out_sum = 0.0;
          for (int k = 0; k < kernels.species; ++k) {
            const KernelEntry& ein = kernels.entry(k, j);
            const KernelEntry& eout = kernels.entry(j, k);
            for (int ap = 0; ap < grid.n_angular(); ++ap) {
              if (ein.fn) {
                if (ein.in_energy_group) {
                  in_sum += grid.ww(ap) *
                            ein.fn(grid.x(ix), grid.omega(ap), grid.omega(a),
                                   grid.E(kE), grid.E(kE));
                } else {
                  for (int kp = 0; kp < grid.n_energy(); ++kp) {
                    double s = ein.fn(grid.x(ix), grid.omega(ap),
                                      grid.omega(a), grid.E(kp), grid.E(kE));
                    if (kernels.tilt_C != 0.0)
                      s *= std::exp(kernels.tilt_C *
                                    (grid.E(kE) - grid.E(kp)));
                    in_sum += grid.ww(ap) * grid.wE(kp) * s;
                  }
                }
              }
              if (eout.fn) {
                if (eout.in_energy_group) {
                  out_sum += grid.ww(ap) *
                             eout.fn(grid.x(ix), grid.omega(a), grid.omega(ap),
                                     grid.E(kE), grid.E(kE));
                } else {
                  for (int kp = 0; kp < grid.n_energy(); ++kp) {
                    double s = eout.fn(grid.x(ix), grid.omega(a),
                                       grid.omega(ap), grid.E(kE), grid.E(kp));
                    if (kernels.tilt_C != 0.0)
                      s *= std::exp(kernels.tilt_C *
                                    (grid.E(kp) - grid.E(kE)));
                    out_sum += grid.ww(ap) * grid.wE(kp) * s;
                  }
                }
              }
            }
          }
          b.M1 = std::max(b.M1, in_sum);
          b.M2 = std::max(b.M2, out_sum);
        }
  b.norm_bound = std::sqrt(b.M1 * b.M2);
  return b;
}

double accretivity_margin(const ScatterData& scatter, const KernelSet& kernels,
                          double C, const PhaseGrid& grid) {
  const KernelSet tilted = tilt_kernels(kernels, C);
  double c = std::numeric_limits<double>::infinity();
  for (int ix = 0; ix < grid.n_spatial(); ++ix)
    for (int j = 0; j < kernels.species; ++j)
      for (int a = 0; a < grid.n_angular(); ++a)
        for (int kE = 0; kE < grid.n_energy(); ++kE) {
          double in_sum = 0.0, out_sum = 0.0;
          for (int k = 0; k < kernels.species; ++k) {
            const KernelEntry& ein = tilted.entry(k, j);
            const KernelEntry& eout = tilted.entry(j, k);
            for (int ap = 0; ap < grid.n_angular(); ++ap) {
              if (ein.fn) {
                if (ein.in_energy_group) {
                  in_sum += grid.ww(ap) *
                            ein.fn(grid.x(ix), grid.omega(ap), grid.omega(a),
                                   grid.E(kE), grid.E(kE));
                } else {
                  for (int kp = 0; kp < grid.n_energy(); ++kp)
                    in_sum += grid.ww(ap) * grid.wE(kp) *
                              ein.fn(grid.x(ix), grid.omega(ap),
                                     grid.omega(a), grid.E(kp), grid.E(kE)) *
                              std::exp(tilted.tilt_C *
                                       (grid.E(kE) - grid.E(kp)));
                }
              }
              if (eout.fn) {
                if (eout.in_energy_group) {
                  out_sum += grid.ww(ap) *
                             eout.fn(grid.x(ix), grid.omega(a),
                                     grid.omega(ap), grid.E(kE), grid.E(kE));
                } else {
                  for (int kp = 0; kp < grid.n_energy(); ++kp)
                    out_sum += grid.ww(ap) * grid.wE(kp) *
                               eout.fn(grid.x(ix), grid.omega(a),
                                       grid.omega(ap), grid.E(kE),
                                       grid.E(kp)) *
                               std::exp(tilted.tilt_C *
                                        (grid.E(kp) - grid.E(kE)));
                }
              }
            }
          }
          const double sj = scatter.Sigma[j]
                                ? scatter.Sigma[j](grid.x(ix), grid.omega(a),
                                                   grid.E(kE))
                                : 0.0;
          c = std::min(c, sj - in_sum);
          c = std::min(c, sj - out_sum);
        }
  return c;
}

TableKernel::TableKernel(std::vector<double> Ep, std::vector<double> E,
                         std::vector<double> mu, std::vector<double> values)
    : Ep_(std::move(Ep)), E_(std::move(E)), mu_(std::move(mu)),
      v_(std::move(values)) {
  if (v_.size() != Ep_.size() * E_.size() * mu_.size())
    throw std::invalid_argument("table kernel: size mismatch");
}

double TableKernel::operator()(double Ep, double E, double mu) const {
  const auto locate = [](const std::vector<double>& t, double v, int& i,
                         double& f) {
    if (t.size() == 1 || v <= t.front()) {
      i = 0;
      f = 0.0;
      return;
    }
    if (v >= t.back()) {
      i = static_cast<int>(t.size()) - 2;
      f = 1.0;
      return;
    }
    int lo = 0, hi = static_cast<int>(t.size()) - 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      (t[mid] <= v ? lo : hi) = mid;
    }
    i = lo;
    f = (v - t[lo]) / (t[lo + 1] - t[lo]);
  };
  int ie, ip, im = 0;
  double fe, fp;
  locate(Ep_, Ep, ip, fp);
  locate(E_, E, ie, fe);
  // Nearest node in the cosine.
  double best = std::numeric_limits<double>::infinity();
  for (size_t m = 0; m < mu_.size(); ++m)
    if (std::abs(mu_[m] - mu) < best) {
      best = std::abs(mu_[m] - mu);
      im = static_cast<int>(m);
    }
  const auto at = [&](int a, int b) {
    return v_[(static_cast<size_t>(a) * E_.size() + b) * mu_.size() + im];
  };
  const int p1 = std::min<int>(ip + 1, Ep_.size() - 1);
  const int e1 = std::min<int>(ie + 1, E_.size() - 1);
  return (1 - fp) * ((1 - fe) * at(ip, ie) + fe * at(ip, e1)) +
         fp * ((1 - fe) * at(p1, ie) + fe * at(p1, e1));
}

}  // namespace csda
