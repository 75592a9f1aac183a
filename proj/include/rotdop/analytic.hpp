#pragma once

// Reduced 3-level model of a D-D dark resonance under relative phase
// modulation: two stable sublevels pumped to one excited level, with an
// effective optical dephasing gamma and weak depolarization gamma' between the
// stable sublevels.

#include <string>
#include <utility>
#include <vector>

#include "rotdop/units.hpp"

namespace rotdop {

struct ThreeLevelParams {
  double rabi = mhz(0.135);       // per arm, rad/s
  double gamma = mhz(30.0);       // effective dephasing, rad/s
  double gamma_prime = 0.0;       // depolarizing rate, rad/s
  double decay = mhz(1.35);       // Gamma_D, rad/s
  double detuning = mhz(30.0);    // common one-photon detuning, rad/s
  double rf = mhz(22.135);        // Omega_RF, rad/s

  /// gamma' gamma / Omega^2, always derived from the current fields.
  double gamma_tilde() const { return gamma_prime * gamma / (rabi * rabi); }
  /// True when Omega > Gamma_D / 5, where the weak-pump formulas degrade.
  bool strong_pumping() const { return rabi > decay / 5.0; }
  void validate() const;

  /// Parameters with gamma' chosen so that gamma_tilde() == gt.
  ThreeLevelParams with_gamma_tilde(double gt) const;
};

struct BesselApprox {
  double a = 1.0;
  double b = 2.0;
  double beta_max = 1.25;
  double max_residual = 0.0; // filled by calibration
};

/// beta = delta_phi^max / Omega_RF with delta_phi^max = (2l or l) v_phi / r.
double micromotion_beta(int l, double r, double v_phi, double rf, bool two_beam);

struct PumpRates {
  double plus = 0.0;  // bright (+) combination, even sidebands
  double minus = 0.0; // dark (-) combination, odd sidebands
};

/// gamma_pump^+- = (gamma/2) sum_n (Omega_n)^2 / (gamma^2 + (Delta - n Omega_RF)^2),
/// Omega_n = sqrt(2) Omega J_n(beta), even n for + and odd n for -.
/// n_max < 0 picks the truncation automatically.
PumpRates pump_rates(const ThreeLevelParams &p, double beta, int n_max = -1);

/// Weak-pump steady-state excited population.
double excited_population(const ThreeLevelParams &p, const PumpRates &rates);

/// F_+ (even n) and F_- (odd n) Lorentzian-weighted Bessel sums.
std::pair<double, double> lorentz_bessel_sums(const ThreeLevelParams &p, double beta,
                                              int n_max = -1);

/// Dark-resonance depth of the reduced model, d = 1 - p_e(on) / p_e(off).
double depth_model1(const ThreeLevelParams &p, double beta, int n_max = -1);

/// a J_0(b beta)^2.
double depth_bessel_approx(const BesselApprox &approx, double beta);

/// Least-squares (a, b) of the J_0^2 form to depth_model1 on the grid;
/// fixed_b > 0 freezes b. Throws ValidationError for grid points beyond
/// beta_max or fewer than 2 points.
BesselApprox calibrate_bessel_approx(const ThreeLevelParams &p, const std::vector<double> &betas,
                                     double fixed_b = 0.0);

} // namespace rotdop
