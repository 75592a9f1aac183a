#include <doctest.h>

#include <cmath>
#include <map>

#include "rotdop/atom.hpp"

using namespace rotdop;

namespace {

double fact(int n) { return std::tgamma(n + 1.0); }

// <j1 m1; j2 m2 | J M> from the Racah formula; all arguments doubled.
double clebsch(int j1, int m1, int j2, int m2, int J, int M) {
  if (m1 + m2 != M || std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J) return 0.0;
  if (J < std::abs(j1 - j2) || J > j1 + j2) return 0.0;
  auto f = [](int twice) { return fact(twice / 2); };
  const double pre = std::sqrt((J + 1) * f(j1 + j2 - J) * f(j1 - j2 + J) * f(-j1 + j2 + J) / f(j1 + j2 + J + 2)) *
                     std::sqrt(f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2));
  double sum = 0.0;
  for (int k = 0; k <= 2 * (j1 + j2 + J); k += 2) {
    const int a = j1 + j2 - J - k, b = j1 - m1 - k, c = j2 + m2 - k, d = J - j2 + m1 + k, e = J - j1 - m2 + k;
    if (a < 0 || b < 0 || c < 0 || d < 0 || e < 0) continue;
    sum += ((k / 2) % 2 ? -1.0 : 1.0) / (f(k) * f(a) * f(b) * f(c) * f(d) * f(e));
  }
  return pre * sum;
}

int two_j_of(Manifold m) { return m == Manifold::D32 ? 3 : 1; }

} // namespace

TEST_SUITE("atom") {

TEST_CASE("Zeeman energies follow g mu_B B m") {
  const auto s = build_level_structure(4.0);
  const double unit = mhz(kBohrMHzPerGauss * 4.0);
  CHECK(s.zeeman_splitting(Manifold::S12) == doctest::Approx(2.0 * unit));
  CHECK(s.zeeman_splitting(Manifold::D32) == doctest::Approx(0.8 * unit));
  CHECK(s.zeeman_splitting(Manifold::P12) == doctest::Approx(2.0 / 3.0 * unit));
  CHECK(s[level::D_m32].energy == doctest::Approx(-1.5 * 0.8 * unit));
  CHECK(s[level::P_p12].energy == doctest::Approx(0.5 * 2.0 / 3.0 * unit));
  // "Zeeman splittings of the order of 10 MHz" at 4 G.
  CHECK(to_mhz(s.zeeman_splitting(Manifold::S12)) == doctest::Approx(11.197).epsilon(1e-3));
}

TEST_CASE("decay channels carry Racah Clebsch-Gordan coefficients") {
  const auto s = build_level_structure(4.0);
  std::map<std::size_t, double> total;
  for (const auto &c : s.decay_channels) {
    const auto &u = s[c.upper];
    const auto &l = s[c.lower];
    const double ref = clebsch(two_j_of(l.manifold), l.two_m, 2, 2 * c.q, 1, u.two_m);
    CAPTURE(c.upper);
    CAPTURE(c.lower);
    CHECK(c.cg == doctest::Approx(ref).epsilon(1e-12));
    CHECK(c.q == (u.two_m - l.two_m) / 2);
    total[c.upper] += c.rate;
  }
  for (auto u : {level::P_m12, level::P_p12})
    CHECK(total[u] == doctest::Approx(s.decay.p_to_s + s.decay.p_to_d));
}

TEST_CASE("coupling amplitudes are normalized to the strongest line") {
  const auto s = build_level_structure(4.0);
  const auto pi = coupling_amplitudes(s, Transition::DP, Polarization::Pi);
  const auto sig = coupling_amplitudes(s, Transition::DP, Polarization::SigmaPlusMinus);
  CHECK(pi.size() == 2);
  CHECK(sig.size() == 4);
  const double strongest = std::abs(clebsch(3, -3, 2, 2, 1, -1));
  for (const auto &v : {pi, sig})
    for (const auto &c : v) {
      const double ref = clebsch(3, s[c.lower].two_m, 2, 2 * c.q, 1, s[c.upper].two_m) / strongest;
      CHECK(std::abs(c.amplitude) == doctest::Approx(std::abs(ref)).epsilon(1e-12));
    }
  // Relative line strengths 1 : 2/3 : 1/3 for sigma(3/2) : pi : sigma(1/2).
  for (const auto &c : pi) CHECK(c.amplitude * c.amplitude == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("dark resonances sit at the two-photon conditions") {
  const auto s = build_level_structure(4.0);
  const double duv = mhz(-20.0), dir2 = mhz(30.0);
  const auto res = dark_resonance_positions(s, duv, dir2);
  const double dd = s.zeeman_splitting(Manifold::D32);
  std::vector<double> dd_centers, sd_centers;
  for (const auto &r : res) (r.kind == DarkKind::DD ? dd_centers : sd_centers).push_back(r.center);
  REQUIRE(dd_centers.size() == 2);
  CHECK(dd_centers[0] == doctest::Approx(dir2 - dd));
  CHECK(dd_centers[1] == doctest::Approx(dir2 + dd));
  // Each DD dip hosts two lambda pairs; six lambda systems in total on the D-D side and S-D side.
  std::size_t pairs = 0;
  for (const auto &r : res)
    if (r.kind == DarkKind::DD) {
      CHECK(r.pairs.size() == 2);
      pairs += r.pairs.size();
    }
  CHECK(pairs == 4);
  // S-D dips are centred on the UV detuning.
  REQUIRE(sd_centers.size() >= 2);
  double mean = 0.0;
  for (double c : sd_centers) mean += c;
  CHECK(mean / sd_centers.size() == doctest::Approx(duv));
}

TEST_CASE("invalid structure parameters are rejected") {
  CHECK_THROWS_AS(build_level_structure(-1.0), ValidationError);
  CHECK_THROWS_AS(build_level_structure(1.0, {}, DecayRates{-1.0, 1.0}), ValidationError);
}

TEST_CASE("structure exports as JSON") {
  const auto j = to_json(build_level_structure(4.0));
  CHECK(j["levels"].size() == 8);
  CHECK(j["field_gauss"] == 4.0);
}

}
