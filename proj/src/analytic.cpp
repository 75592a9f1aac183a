#include "rotdop/analytic.hpp"

#include <cmath>

#include <Eigen/Core>

#include "rotdop/lsq.hpp"
#include "rotdop/special.hpp"

namespace rotdop {

void ThreeLevelParams::validate() const {
  if (!(rabi > 0.0) || !(gamma > 0.0) || !(decay > 0.0))
    throw ValidationError("Rabi frequency, dephasing and decay rate must be positive");
  if (!(gamma_prime >= 0.0)) throw ValidationError("depolarizing rate must be non-negative");
  if (!(rf > 0.0)) throw ValidationError("RF frequency must be positive");
  if (!std::isfinite(detuning)) throw ValidationError("detuning must be finite");
}

ThreeLevelParams ThreeLevelParams::with_gamma_tilde(double gt) const {
  ThreeLevelParams p = *this;
  p.gamma_prime = gt * rabi * rabi / gamma;
  return p;
}

double micromotion_beta(int l, double r, double v_phi, double rf, bool two_beam) {
  if (!(rf > 0.0)) throw ValidationError("RF frequency must be positive");
  if (r < 0.0) throw ValidationError("radius must be non-negative");
  if (r == 0.0) throw SingularityError("beta diverges on the beam axis");
  const double factor = two_beam ? 2.0 * l : static_cast<double>(l);
  return factor * v_phi / r / rf;
}

namespace {

int resolve_nmax(double beta, int n_max) {
  return n_max >= 0 ? n_max : bessel_truncation(beta, 1e-12, 60);
}

// Sums J_n^2 w_n over n in [-n_max, n_max], split by parity of n.
template <class Weight>
std::pair<double, double> parity_sums(double beta, int n_max, Weight w) {
  const auto j = bessel_j_table(beta, n_max);
  double even = 0.0, odd = 0.0;
  for (int n = -n_max; n <= n_max; ++n) {
    const double jn = j[static_cast<std::size_t>(std::abs(n))];
    const double term = jn * jn * w(n);
    (n % 2 == 0 ? even : odd) += term;
  }
  return {even, odd};
}

} // namespace

PumpRates pump_rates(const ThreeLevelParams &p, double beta, int n_max) {
  p.validate();
  const int nm = resolve_nmax(beta, n_max);
  const auto [even, odd] = parity_sums(beta, nm, [&](int n) {
    const double dn = p.detuning - n * p.rf;
    // (gamma/2) * (sqrt(2) Omega)^2 / (gamma^2 + dn^2), per unit J_n^2.
    return p.gamma * p.rabi * p.rabi / (p.gamma * p.gamma + dn * dn);
  });
  return {even, odd};
}

double excited_population(const ThreeLevelParams &p, const PumpRates &g) {
  p.validate();
  const double sum = g.plus + g.minus;
  const double den = sum + 4.0 * p.gamma_prime;
  if (!(den > 0.0)) throw SingularityError("excited population undefined: all rates vanish");
  return 2.0 / p.decay * (g.plus * g.minus + p.gamma_prime * sum) / den;
}

std::pair<double, double> lorentz_bessel_sums(const ThreeLevelParams &p, double beta, int n_max) {
  p.validate();
  const int nm = resolve_nmax(beta, n_max);
  return parity_sums(beta, nm, [&](int n) {
    const double x = (p.detuning - n * p.rf) / p.gamma;
    return 1.0 / (1.0 + x * x);
  });
}

double depth_model1(const ThreeLevelParams &p, double beta, int n_max) {
  const auto [fp, fm] = lorentz_bessel_sums(p, beta, n_max);
  const double gt = p.gamma_tilde();
  const double s = fp + fm;
  return 1.0 - 4.0 / s * (fp * fm + gt * s) / (s + 4.0 * gt);
}

double depth_bessel_approx(const BesselApprox &approx, double beta) {
  const double j0 = bessel_j(0, approx.b * beta);
  return approx.a * j0 * j0;
}

BesselApprox calibrate_bessel_approx(const ThreeLevelParams &p, const std::vector<double> &betas,
                                     double fixed_b) {
  BesselApprox out;
  if (betas.size() < 2) throw ValidationError("calibration needs at least 2 beta values");
  for (double b : betas)
    if (b < 0.0 || b > out.beta_max)
      throw ValidationError("calibration grid must lie within [0, " + std::to_string(out.beta_max) + "]");
  Eigen::VectorXd target(static_cast<Eigen::Index>(betas.size()));
  for (std::size_t i = 0; i < betas.size(); ++i)
    target[static_cast<Eigen::Index>(i)] = depth_model1(p, betas[i]);

  const bool free_b = !(fixed_b > 0.0);
  auto model = [&](double a, double b, double beta) {
    return depth_bessel_approx({a, b, out.beta_max, 0.0}, beta);
  };
  auto residuals = [&](const Eigen::VectorXd &x) {
    Eigen::VectorXd r(target.size());
    const double b = free_b ? x[1] : fixed_b;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      r[i] = model(x[0], b, betas[static_cast<std::size_t>(i)]) - target[i];
    return r;
  };
  Eigen::VectorXd x0(free_b ? 2 : 1);
  x0[0] = std::clamp(target[0], 1e-3, 1.0);
  if (free_b) x0[1] = 2.0;
  std::vector<Bound> bounds{{1e-9, 1.0}};
  if (free_b) bounds.push_back({0.1, 10.0});
  const auto fit = levenberg_marquardt(residuals, x0, bounds);
  if (!fit.converged) throw std::runtime_error("Bessel calibration did not converge: " + fit.message);
  out.a = fit.x[0];
  out.b = free_b ? fit.x[1] : fixed_b;
  out.max_residual = fit.residuals.lpNorm<Eigen::Infinity>();
  return out;
}

} // namespace rotdop
