#pragma once

// Physical cross-section models: Compton-Klein-Nishina photon scattering
// (photon->photon and photon->electron branches), Moller electron-electron
// scattering with its primary/secondary split, the circle path-integral form
// of delta-in-angle collision terms, and the CSDA reduction of the Moller
// kernel into stopping/absorption coefficients plus restricted Schur kernels.

#include <functional>
#include <vector>

#include "csda/vec3.hpp"

namespace csda {

using SpatialFn = std::function<double(const Vec3&)>;

struct ComptonKinematics {
  double mu = 0.0;          // scattering cosine mu11
  bool chi = false;         // kinematic admissibility
  double sigma_hat = 0.0;   // (1/E')^2 (E'/E + E/E' - 1 + mu^2), no sigma0
};

// Photon -> photon branch: mu11 = 1 + 1/E' - 1/E.
ComptonKinematics compton_kinematics(double E_prime, double E,
                                     double E_cutoff = 0.0);

struct ComptonRecoilKinematics {
  double mu = 0.0;         // mu12
  bool chi = false;
  double sigma_hat = 0.0;  // sigma_hat11(E', E'-E) (1+E')^2 (1-mu11(E',E'-E))^2 / mu12^3
};

// Photon -> electron branch: mu12 = (1+1/E') sqrt(E/(E+2)).
ComptonRecoilKinematics compton_recoil_kinematics(double E_prime, double E,
                                                  double E_cutoff = 0.0);

enum class MollerBranch { Primary, Secondary, Excluded };

struct MollerKinematics {
  double mu = 0.0;  // mu22 of the active branch
  MollerBranch branch = MollerBranch::Excluded;
  double sigma_hat0 = 0.0;  // (E'+1)^2/(E'(E'+2)) (1/E^2 + 1/(E'+1)^2)
  double sigma_hat1 = 0.0;  // -(2E'+1)/(E'(E'+2) E)
  double sigma_hat2 = 0.0;  // (E'+1)^2/(E'(E'+2))
};

// Primary branch on E'/2 <= E <= E' (ties at E = E'/2 go primary),
// secondary on E_cutoff <= E < E'/2 with mu22s(E',E) = mu22p(E', E'-E).
MollerKinematics moller_kinematics(double E_prime, double E,
                                   double E_cutoff = 0.0);

// int_0^{2pi} psi(gamma(s)) ds with gamma the circle {w' : w'.w = mu},
// uniform trapezoid in arc parameter.
double circle_average(const std::function<double(const Vec3&)>& psi,
                      const Vec3& omega, double mu, int n_s = 64);

struct ComptonModel {
  SpatialFn sigma0;
  double epsilon = 0.1;  // angular mollification width
};

struct MollerModel {
  SpatialFn sigma0;
  double epsilon = 0.1;
};

// Result of the CSDA reduction of the Moller kernel at fixed (x, E):
// the coefficient of d(psi)/dE, the zeroth-order coefficient, and the
// restricted (E' >= 2E) mollified Schur kernel.
struct CsdaCoefficients {
  double stopping_coeff = 0.0;    // sigma_hat2(x,E,E) ln E
  double absorption_coeff = 0.0;  // -sigma_hat2/E + d(sigma_hat2)/dE' ln E + sigma_hat1 ln E
  // Restricted mollified kernel sigma_r(x, w', w, E', E); vanishes for
  // E' < 2E.
  std::function<double(const Vec3&, const Vec3&, const Vec3&, double, double)>
      restricted_kernel;
};

CsdaCoefficients csda_reduce_moller(const MollerModel& model, const Vec3& x,
                                    double E, double Em,
                                    double E_cutoff = 0.0);

// S_r(x,E) = sum sigma_n(x,E) eps_n and Sigma_r^at = sum sigma_n.
struct StoppingLevel {
  std::function<double(const Vec3&, double)> sigma;
  double eps = 0.0;
};
struct RestrictedStoppingPower {
  std::function<double(const Vec3&, double)> S_r;
  std::function<double(const Vec3&, double)> Sigma_at;
};
RestrictedStoppingPower restricted_stopping_power(
    std::vector<StoppingLevel> levels);

}  // namespace csda
