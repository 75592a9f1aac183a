#include "rotdop/atom.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rotdop {

namespace {

// Signed <j_l m_l; 1 q | 1/2 m_u> for the two lower manifolds, indexed by
// (2 m_l, 2 m_u). Exact values, hard-coded.
double cg_to_p12(Manifold lower, int two_ml, int two_mu) {
  const double s3 = std::sqrt(3.0) / 3.0;
  const double s6 = std::sqrt(6.0) / 3.0;
  const double s6b = std::sqrt(6.0) / 6.0;
  const double s2 = std::sqrt(2.0) / 2.0;
  if (lower == Manifold::S12) {
    if (two_ml == -1 && two_mu == -1) return -s3;
    if (two_ml == -1 && two_mu == 1) return -s6;
    if (two_ml == 1 && two_mu == -1) return s6;
    if (two_ml == 1 && two_mu == 1) return s3;
    return 0.0;
  }
  if (lower == Manifold::D32) {
    if (two_ml == -3 && two_mu == -1) return s2;
    if (two_ml == -1 && two_mu == -1) return -s3;
    if (two_ml == -1 && two_mu == 1) return s6b;
    if (two_ml == 1 && two_mu == -1) return s6b;
    if (two_ml == 1 && two_mu == 1) return -s3;
    if (two_ml == 3 && two_mu == 1) return s2;
    return 0.0;
  }
  return 0.0;
}

double g_of(const GFactors &g, Manifold m) {
  switch (m) {
  case Manifold::S12: return g.s;
  case Manifold::D32: return g.d;
  case Manifold::P12: return g.p;
  }
  return 0.0;
}

void check_rate(double r, const char *what) {
  if (!(r >= 0.0) || !std::isfinite(r))
    throw ValidationError(std::string("rate must be finite and non-negative: ") + what);
}

} // namespace

std::string to_string(Manifold m) {
  switch (m) {
  case Manifold::S12: return "S12";
  case Manifold::D32: return "D32";
  case Manifold::P12: return "P12";
  }
  return "?";
}

std::string to_string(Polarization p) { return p == Polarization::Pi ? "pi" : "sigma+-"; }

std::string to_string(DarkKind k) { return k == DarkKind::SD ? "SD" : "DD"; }

int two_j(Manifold m) { return m == Manifold::D32 ? 3 : 1; }

double LevelStructure::zeeman_splitting(Manifold m) const {
  return g_of(g, m) * kTwoPi * kBohrMHzPerGauss * 1e6 * field_gauss;
}

LevelStructure build_level_structure(double field_gauss, const GFactors &g,
                                     const DecayRates &rates, const Dephasings &dephasings) {
  if (!(field_gauss >= 0.0) || !std::isfinite(field_gauss))
    throw ValidationError("magnetic field must be finite and non-negative");
  check_rate(rates.p_to_s, "p_to_s");
  check_rate(rates.p_to_d, "p_to_d");
  check_rate(dephasings.depolarizing, "depolarizing");
  for (const auto &c : dephasings.channels) check_rate(c.rate, "dephasing");

  LevelStructure s;
  s.field_gauss = field_gauss;
  s.g = g;
  s.decay = rates;
  s.dephasing_channels = dephasings.channels;
  s.depolarizing = dephasings.depolarizing;

  const std::array<std::pair<Manifold, int>, kNumLevels> order{{{Manifold::S12, -1},
                                                               {Manifold::S12, 1},
                                                               {Manifold::D32, -3},
                                                               {Manifold::D32, -1},
                                                               {Manifold::D32, 1},
                                                               {Manifold::D32, 3},
                                                               {Manifold::P12, -1},
                                                               {Manifold::P12, 1}}};
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const auto [man, two_m] = order[i];
    s.levels[i] = ZeemanLevel{man, two_m, 0.5 * two_m * s.zeeman_splitting(man)};
  }

  for (std::size_t u = level::P_m12; u <= level::P_p12; ++u) {
    for (std::size_t l = 0; l < level::P_m12; ++l) {
      const auto &lo = s.levels[l];
      const double c = cg_to_p12(lo.manifold, lo.two_m, s.levels[u].two_m);
      if (c == 0.0) continue;
      const double total = lo.manifold == Manifold::S12 ? rates.p_to_s : rates.p_to_d;
      const int q = (s.levels[u].two_m - lo.two_m) / 2;
      s.decay_channels.push_back({u, l, total * c * c, c * c, q, c});
    }
  }
  return s;
}

std::vector<Coupling> coupling_amplitudes(const LevelStructure &s, Transition t, Polarization p) {
  const Manifold lower = t == Transition::SP ? Manifold::S12 : Manifold::D32;
  // Strongest line: sigma in both cases (sqrt(2/3) for S-P, sqrt(1/2) for D-P).
  const double norm = t == Transition::SP ? std::sqrt(6.0) / 3.0 : std::sqrt(2.0) / 2.0;
  std::vector<Coupling> out;
  for (std::size_t l = 0; l < level::P_m12; ++l) {
    if (s.levels[l].manifold != lower) continue;
    for (std::size_t u = level::P_m12; u <= level::P_p12; ++u) {
      const int dm2 = s.levels[u].two_m - s.levels[l].two_m;
      const bool allowed = p == Polarization::Pi ? dm2 == 0 : std::abs(dm2) == 2;
      if (!allowed) continue;
      const double c = cg_to_p12(lower, s.levels[l].two_m, s.levels[u].two_m);
      if (c == 0.0) continue;
      out.push_back({l, u, c / norm, dm2 / 2});
    }
  }
  return out;
}

std::vector<DarkResonance> dark_resonance_positions(const LevelStructure &s, double detuning_uv,
                                                    double detuning_ir2) {
  struct Raw {
    double center;
    DarkKind kind;
    DarkPair pair;
  };
  std::vector<Raw> raw;
  const auto ir1 = coupling_amplitudes(s, Transition::DP, Polarization::Pi);
  const auto ir2 = coupling_amplitudes(s, Transition::DP, Polarization::SigmaPlusMinus);
  const auto uv = coupling_amplitudes(s, Transition::SP, Polarization::SigmaPlusMinus);

  // Two-photon condition through a shared upper level u:
  //   Delta_IR1 + E(a) = Delta_other + E(b)
  for (const auto &a : ir1) {
    for (const auto &b : uv) {
      if (b.upper != a.upper) continue;
      raw.push_back({detuning_uv + s.levels[b.lower].energy - s.levels[a.lower].energy,
                     DarkKind::SD,
                     {a.lower, b.lower, a.upper}});
    }
    for (const auto &b : ir2) {
      if (b.upper != a.upper) continue;
      raw.push_back({detuning_ir2 + s.levels[b.lower].energy - s.levels[a.lower].energy,
                     DarkKind::DD,
                     {a.lower, b.lower, a.upper}});
    }
  }

  std::vector<DarkResonance> out;
  const double tol = 1e-9 * (1.0 + std::abs(detuning_uv) + std::abs(detuning_ir2));
  for (const auto &r : raw) {
    auto it = std::find_if(out.begin(), out.end(), [&](const DarkResonance &d) {
      return d.kind == r.kind && std::abs(d.center - r.center) <= tol;
    });
    if (it == out.end())
      out.push_back({r.center, r.kind, {r.pair}});
    else
      it->pairs.push_back(r.pair);
  }
  std::sort(out.begin(), out.end(),
            [](const DarkResonance &x, const DarkResonance &y) { return x.center < y.center; });
  return out;
}

nlohmann::ordered_json to_json(const LevelStructure &s) {
  nlohmann::ordered_json j;
  j["field_gauss"] = s.field_gauss;
  j["g_factors"] = {{"s", s.g.s}, {"d", s.g.d}, {"p", s.g.p}};
  j["decay_rates_rad_s"] = {{"p_to_s", s.decay.p_to_s}, {"p_to_d", s.decay.p_to_d}};
  auto &lv = j["levels"] = nlohmann::ordered_json::array();
  for (const auto &l : s.levels)
    lv.push_back({{"manifold", to_string(l.manifold)}, {"m", l.m()}, {"energy_rad_s", l.energy}});
  auto &dc = j["decay_channels"] = nlohmann::ordered_json::array();
  for (const auto &c : s.decay_channels)
    dc.push_back({{"upper", c.upper},
                  {"lower", c.lower},
                  {"rate_rad_s", c.rate},
                  {"branching", c.branching},
                  {"q", c.q}});
  auto &dp = j["dephasing_channels"] = nlohmann::ordered_json::array();
  for (const auto &c : s.dephasing_channels)
    dp.push_back({{"a", to_string(c.a)}, {"b", to_string(c.b)}, {"rate_rad_s", c.rate}});
  j["depolarizing_rad_s"] = s.depolarizing;
  return j;
}

} // namespace rotdop
