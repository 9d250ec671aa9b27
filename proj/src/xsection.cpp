#include "csda/xsection.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "csda/hadamard.hpp"

namespace csda {

ComptonKinematics compton_kinematics(double E_prime, double E,
                                     double E_cutoff) {
  if (!(E_prime > 0.0) || !(E > 0.0))
    throw std::invalid_argument("compton: energies must be positive");
  ComptonKinematics k;
  k.mu = 1.0 + 1.0 / E_prime - 1.0 / E;
  k.chi = (E >= E_cutoff) && (E >= E_prime / (1.0 + 2.0 * E_prime)) &&
          (E_prime >= E);
  const double inv2 = 1.0 / (E_prime * E_prime);
  k.sigma_hat = inv2 * (E_prime / E + E / E_prime - 1.0 + k.mu * k.mu);
  return k;
}

ComptonRecoilKinematics compton_recoil_kinematics(double E_prime, double E,
                                                  double E_cutoff) {
  if (!(E_prime > 0.0) || !(E > 0.0))
    throw std::invalid_argument("compton: energies must be positive");
  ComptonRecoilKinematics k;
  k.mu = (1.0 + 1.0 / E_prime) * std::sqrt(E / (E + 2.0));
  const double max_transfer =
      2.0 * E_prime * E_prime / (1.0 + 2.0 * E_prime);
  k.chi = (E >= E_cutoff) && (E <= max_transfer) && (E <= E_prime);
  if (E_prime > E) {
    const ComptonKinematics ph = compton_kinematics(E_prime, E_prime - E);
    const double om = 1.0 - ph.mu;
    k.sigma_hat = ph.sigma_hat * (1.0 + E_prime) * (1.0 + E_prime) * om * om /
                  (k.mu * k.mu * k.mu);
  }
  return k;
}

namespace {
double moller_mu_primary(double E_prime, double E) {
  return std::sqrt(E * (E_prime + 2.0) / (E_prime * (E + 2.0)));
}
}  // namespace

MollerKinematics moller_kinematics(double E_prime, double E, double E_cutoff) {
  if (!(E_prime > 0.0) || !(E > 0.0))
    throw std::invalid_argument("moller: energies must be positive");
  MollerKinematics k;
  const double pref = (E_prime + 1.0) * (E_prime + 1.0) /
                      (E_prime * (E_prime + 2.0));
  k.sigma_hat0 = pref * (1.0 / (E * E) +
                         1.0 / ((E_prime + 1.0) * (E_prime + 1.0)));
  k.sigma_hat1 =
      -(2.0 * E_prime + 1.0) / (E_prime * (E_prime + 2.0) * E);
  k.sigma_hat2 = pref;
  if (E < E_cutoff || E > E_prime) {
    k.branch = MollerBranch::Excluded;
    return k;
  }
  if (E >= 0.5 * E_prime) {
    k.branch = MollerBranch::Primary;
    k.mu = moller_mu_primary(E_prime, E);
  } else {
    k.branch = MollerBranch::Secondary;
    k.mu = moller_mu_primary(E_prime, E_prime - E);
  }
  return k;
}

double circle_average(const std::function<double(const Vec3&)>& psi,
                      const Vec3& omega, double mu, int n_s) {
  if (std::abs(mu) > 1.0)
    throw std::invalid_argument("circle_average: |mu| must be <= 1");
  Vec3 u, v;
  orthonormal_frame(omega, u, v);
  const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  double sum = 0.0;
  for (int i = 0; i < n_s; ++i) {
    const double s = 2.0 * M_PI * (i + 0.5) / n_s;
    const Vec3 w = u * (st * std::cos(s)) + v * (st * std::sin(s)) +
                   omega * mu;
    sum += psi(w);
  }
  return sum * 2.0 * M_PI / n_s;
}

CsdaCoefficients csda_reduce_moller(const MollerModel& model, const Vec3& x,
                                    double E, double Em, double E_cutoff) {
  if (!(E > 0.0))
    throw std::invalid_argument("csda_reduce_moller: E must be > 0");
  const double s0 = model.sigma0 ? model.sigma0(x) : 0.0;
  const double lnE = std::log(E);

  const auto sigma_hat2 = [](double Ep) {
    return (Ep + 1.0) * (Ep + 1.0) / (Ep * (Ep + 2.0));
  };
  const double sh2 = sigma_hat2(E);
  const double sh1 = -(2.0 * E + 1.0) / (E * (E + 2.0) * E);
  const double h = 1e-6 * E;
  const double dsh2 = (sigma_hat2(E + h) - sigma_hat2(E - h)) / (2.0 * h);

  CsdaCoefficients c;
  c.stopping_coeff = s0 * sh2 * lnE;
  c.absorption_coeff = s0 * (-sh2 / E + dsh2 * lnE + sh1 * lnE);

  const double eps = model.epsilon;
  const SpatialFn sigma0 = model.sigma0;
  c.restricted_kernel = [sigma0, eps, E_cutoff](const Vec3& xx,
                                                const Vec3& wp, const Vec3& w,
                                                double Ep, double Ev) {
    if (Ep < 2.0 * Ev || Ev < E_cutoff || !(Ev > 0.0) || !(Ep > 0.0))
      return 0.0;
    const MollerKinematics k = moller_kinematics(Ep, Ev, E_cutoff);
    if (k.branch == MollerBranch::Excluded) return 0.0;
    const double d = Ep - Ev;
    const double val = k.sigma_hat0 + k.sigma_hat1 / d +
                       k.sigma_hat2 / (d * d);
    const double s = sigma0 ? sigma0(xx) : 0.0;
    return s * val * mollified_delta_cosine(eps, dot(wp, w), k.mu);
  };
  (void)Em;
  return c;
}

RestrictedStoppingPower restricted_stopping_power(
    std::vector<StoppingLevel> levels) {
  RestrictedStoppingPower r;
  auto shared = std::make_shared<std::vector<StoppingLevel>>(std::move(levels));
  r.S_r = [shared](const Vec3& x, double E) {
    double s = 0.0;
    for (const auto& lv : *shared) s += lv.sigma(x, E) * lv.eps;
    return s;
  };
  r.Sigma_at = [shared](const Vec3& x, double E) {
    double s = 0.0;
    for (const auto& lv : *shared) s += lv.sigma(x, E);
    return s;
  };
  return r;
}

}  // namespace csda
