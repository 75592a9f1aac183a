#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rotdop/analytic.hpp"

using namespace rotdop;

TEST_SUITE("analytic") {

TEST_CASE("model depth agrees with the brute-force three-level master equation") {
  const auto p = ThreeLevelParams{}.with_gamma_tilde(1e-3);
  for (double beta : {0.0, 0.6, 1.1}) {
    CAPTURE(beta);
    CHECK(depth_model1(p, beta) == doctest::Approx(oracle::three_level_depth(p, beta)).scale(1).epsilon(0.01));
  }
}

TEST_CASE("unmodulated depth has a closed form") {
  for (double gt : {0.0, 1e-3, 0.05, 1.0}) {
    const auto p = ThreeLevelParams{}.with_gamma_tilde(gt);
    const double x = p.detuning / p.gamma;
    const double fp = 1.0 / (1.0 + x * x);
    CHECK(depth_model1(p, 0.0) == doctest::Approx(fp / (fp + 4.0 * gt)));
  }
}

TEST_CASE("pump rates obey the Bessel sum rule for broad lines") {
  ThreeLevelParams p;
  p.gamma = mhz(1e5); // much wider than every sideband offset
  for (double beta : {0.3, 1.7, 4.0}) {
    const auto r = pump_rates(p, beta);
    CHECK(r.plus + r.minus == doctest::Approx(p.rabi * p.rabi / p.gamma).epsilon(1e-6));
    const auto [fp, fm] = lorentz_bessel_sums(p, beta);
    CHECK(fp + fm == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Odd sidebands vanish without modulation.
  CHECK(pump_rates(ThreeLevelParams{}, 0.0).minus == doctest::Approx(0.0));
}

TEST_CASE("excited population: dark state without depolarization") {
  ThreeLevelParams p;
  const auto r = pump_rates(p, 0.0);
  CHECK(excited_population(p, r) == doctest::Approx(0.0));
  p.gamma_prime = khz(1);
  CHECK(excited_population(p, r) > 0.0);
  CHECK_THROWS_AS(excited_population(ThreeLevelParams{}, PumpRates{}), SingularityError);
}

TEST_CASE("J0 squared approximation calibrates near b = 2") {
  const auto p = ThreeLevelParams{}.with_gamma_tilde(1e-3);
  std::vector<double> betas;
  for (int i = 0; i <= 25; ++i) betas.push_back(0.05 * i);
  const auto fit = calibrate_bessel_approx(p, betas);
  CHECK(fit.b > 1.8);
  CHECK(fit.b < 2.2);
  CHECK(fit.a == doctest::Approx(depth_model1(p, 0.0)).epsilon(0.05));
  CHECK(fit.max_residual < 0.05);
  const auto fixed = calibrate_bessel_approx(p, betas, 2.0);
  CHECK(fixed.b == 2.0);
  CHECK(depth_bessel_approx(fixed, 0.0) == doctest::Approx(fixed.a));
  betas.push_back(1.5);
  CHECK_THROWS_AS(calibrate_bessel_approx(p, betas), ValidationError);
  CHECK_THROWS_AS(calibrate_bessel_approx(p, {0.1}), ValidationError);
}

TEST_CASE("modulation index") {
  const double rf = mhz(22.135);
  CHECK(micromotion_beta(2, 20e-6, 175.0, rf, true) == doctest::Approx(4.0 * 175.0 / 20e-6 / rf));
  CHECK(micromotion_beta(2, 20e-6, 175.0, rf, false) == doctest::Approx(2.0 * 175.0 / 20e-6 / rf));
  CHECK_THROWS(micromotion_beta(2, 0.0, 175.0, rf, true));
}

TEST_CASE("parameter validation") {
  ThreeLevelParams p;
  p.rabi = 0.0;
  CHECK_THROWS_AS(depth_model1(p, 0.5), ValidationError);
  CHECK(ThreeLevelParams{}.with_gamma_tilde(0.2).gamma_tilde() == doctest::Approx(0.2));
  ThreeLevelParams strong;
  strong.rabi = mhz(1.0);
  CHECK(strong.strong_pumping());
  CHECK_FALSE(ThreeLevelParams{}.strong_pumping());
}

}
