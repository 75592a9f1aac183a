#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rotdop/beams.hpp"

using namespace rotdop;

TEST_SUITE("beams") {

TEST_CASE("lg_doppler_shift equals the finite-difference phase gradient") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(-60e-6, 60e-6), vel(-300.0, 300.0), zz(-1.0, 1.0);
  std::uniform_int_distribution<int> ll(-4, 4), pp(0, 2);
  int checked = 0;
  while (checked < 100) {
    const auto b = BeamGeometry::laguerre_gauss(866e-9, 20e-6, ll(rng), pp(rng), pos(rng) / 10.0, pos(rng) / 10.0);
    const Vec3 p{pos(rng), pos(rng), zz(rng) * 2.0 * b.rayleigh_range()};
    if (std::hypot(p[0] - b.x0(), p[1] - b.y0()) < 1e-6) continue;
    const Vec3 v{vel(rng), vel(rng), vel(rng)};
    const auto kin = kinematics_from_cartesian(b, p, v);
    const double ref = oracle::fd_doppler_shift(b, p, v);
    CAPTURE(checked);
    CHECK(lg_doppler_shift(b, kin) == doctest::Approx(ref).epsilon(1e-6));
    ++checked;
  }
}

TEST_CASE("plane waves and the azimuthal term") {
  const auto pw = BeamGeometry::plane_wave(397e-9);
  const auto kin = kinematics_from_cartesian(pw, {1e-6, 0, 0}, {0, 0, 10.0});
  CHECK(lg_doppler_shift(pw, kin) == doctest::Approx(-pw.k() * 10.0));
  CHECK(plane_wave_shift(397e-9, {0, 0, 2.0}, {0, 0, 10.0}) == doctest::Approx(-pw.k() * 10.0));

  const auto b = BeamGeometry::laguerre_gauss(866e-9, 20e-6, 2);
  const auto k2 = kinematics_from_cartesian(b, {10e-6, 0, 0}, {0, 175.0, 0});
  CHECK(k2.v_phi == doctest::Approx(175.0));
  CHECK(azimuthal_shift(b, k2) == doctest::Approx(-2.0 * 175.0 / 10e-6));
  // Purely azimuthal motion in the waist plane: only the azimuthal term survives.
  CHECK(lg_doppler_shift(b, k2) == doctest::Approx(azimuthal_shift(b, k2)));
}

TEST_CASE("relative shift of counter-rotating beams is 2 l v / r") {
  const auto b1 = BeamGeometry::laguerre_gauss(866e-9, 20e-6, 2);
  const auto b2 = b1.with_winding(-2);
  const Vec3 p{0, 15e-6, 0}, v{-175.0, 0, 0};
  const auto k1 = kinematics_from_cartesian(b1, p, v), k2 = kinematics_from_cartesian(b2, p, v);
  CHECK(std::abs(relative_two_beam_shift(b1, b2, k1, k2)) == doctest::Approx(2 * 2 * 175.0 / 15e-6));
  // Co-rotating: no relative shift.
  CHECK(relative_two_beam_shift(b1, b1, k1, k1) == doctest::Approx(0.0));
}

TEST_CASE("axis singularity") {
  const auto b = BeamGeometry::laguerre_gauss(866e-9, 20e-6, 2);
  const auto kin = kinematics_from_cartesian(b, {0, 0, 0}, {10.0, 0, 0});
  CHECK(kin.azimuthal_singular);
  CHECK_THROWS_AS(lg_doppler_shift(b, kin), SingularityError);
  // On axis without transverse motion the shift is finite.
  const auto still = kinematics_from_cartesian(b, {0, 0, 0}, {0, 0, 1.0});
  CHECK_NOTHROW(lg_doppler_shift(b, still));
}

TEST_CASE("intensity profile") {
  const auto b = BeamGeometry::laguerre_gauss(866e-9, 20e-6, 2);
  const double rp = lg_intensity_peak_radius(b);
  CHECK(rp == doctest::Approx(20e-6));
  CHECK(lg_intensity(b, rp) == doctest::Approx(1.0));
  CHECK(lg_intensity(b, 0.98 * rp) < 1.0);
  CHECK(lg_intensity(b, 1.02 * rp) < 1.0);
  // Near the core I ~ (r / w0)^(2|l|).
  const double r = 0.5e-6;
  const double ratio = lg_intensity(b, r) / lg_intensity(b, 2 * r);
  CHECK(ratio == doctest::Approx(std::pow(0.5, 4)).epsilon(1e-3));
  CHECK_THROWS_AS(lg_intensity(BeamGeometry::plane_wave(866e-9), 1e-6), ValidationError);
}

TEST_CASE("sensitivity scaling") {
  CHECK(sensitivity_scaling(2, 1.0) == doctest::Approx(4.0));
  CHECK(sensitivity_scaling(2, 1.0 / 16.0) == doctest::Approx(8.0));
  CHECK_THROWS_AS(sensitivity_scaling(2, 0.0), SingularityError);
  CHECK_THROWS_AS(sensitivity_scaling(0, 0.5), ValidationError);
}

TEST_CASE("invalid geometry") {
  CHECK_THROWS_AS(BeamGeometry::laguerre_gauss(866e-9, 0.0, 2), ValidationError);
  CHECK_THROWS_AS(BeamGeometry::plane_wave(-1.0), ValidationError);
}

}
