#pragma once

// Zeeman-resolved level structure of 40Ca+ restricted to the S1/2, D3/2 and
// P1/2 manifolds (8 sublevels), with dipole couplings and incoherent channels.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotdop/units.hpp"

namespace rotdop {

enum class Manifold { S12, D32, P12 };

enum class Transition { SP, DP };

enum class Polarization { Pi, SigmaPlusMinus };

enum class DarkKind { SD, DD };

std::string to_string(Manifold m);
std::string to_string(Polarization p);
std::string to_string(DarkKind k);

inline constexpr std::size_t kNumLevels = 8;

// Fixed basis ordering used by every matrix in the project.
namespace level {
inline constexpr std::size_t S_m12 = 0;
inline constexpr std::size_t S_p12 = 1;
inline constexpr std::size_t D_m32 = 2;
inline constexpr std::size_t D_m12 = 3;
inline constexpr std::size_t D_p12 = 4;
inline constexpr std::size_t D_p32 = 5;
inline constexpr std::size_t P_m12 = 6;
inline constexpr std::size_t P_p12 = 7;
} // namespace level

/// Twice the total angular momentum j of a manifold.
int two_j(Manifold m);

struct ZeemanLevel {
  Manifold manifold;
  int two_m;     // 2m, so half-integers stay exact
  double energy; // rad/s, relative to the zero-field manifold energy

  double m() const { return 0.5 * two_m; }
};

struct GFactors {
  double s = 2.0;
  double d = 0.8;
  double p = 2.0 / 3.0;
};

struct DecayRates {
  double p_to_s = mhz(21.57);
  double p_to_d = mhz(1.35);
};

/// Dephasing of coherences between two manifolds (a != b) or between the
/// sublevels of a single manifold (a == b).
struct DephasingChannel {
  Manifold a;
  Manifold b;
  double rate; // rad/s
};

struct Dephasings {
  std::vector<DephasingChannel> channels{{Manifold::S12, Manifold::D32, khz(100.0)},
                                         {Manifold::D32, Manifold::D32, 0.0}};
  double depolarizing = 0.0; // gamma' within D32, rad/s
};

struct DecayChannel {
  std::size_t upper;
  std::size_t lower;
  double rate;      // partial rate into this sublevel, rad/s
  double branching; // fraction of the manifold-resolved rate
  int q;            // photon polarization, m_upper - m_lower
  double cg;        // signed Clebsch-Gordan coefficient <j_l m_l; 1 q | j_u m_u>
};

struct LevelStructure {
  double field_gauss = 0.0;
  GFactors g;
  DecayRates decay;
  std::array<ZeemanLevel, kNumLevels> levels{};
  std::vector<DecayChannel> decay_channels;
  std::vector<DephasingChannel> dephasing_channels;
  double depolarizing = 0.0;

  /// Adjacent-m angular splitting of a manifold, g * muB * B / hbar.
  double zeeman_splitting(Manifold m) const;
  const ZeemanLevel &operator[](std::size_t i) const { return levels[i]; }
};

/// Builds the 8-level structure. Throws ValidationError on negative field or rates.
LevelStructure build_level_structure(double field_gauss, const GFactors &g = {},
                                     const DecayRates &rates = {},
                                     const Dephasings &dephasings = {});

struct Coupling {
  std::size_t lower;
  std::size_t upper;
  double amplitude; // normalized so the strongest line of the transition is 1
  int q;
};

/// Dipole-allowed pairs for a laser of the given polarization on the given
/// transition, with Clebsch-Gordan amplitudes relative to the strongest line.
std::vector<Coupling> coupling_amplitudes(const LevelStructure &s, Transition t, Polarization p);

struct DarkPair {
  std::size_t ir1_level;   // lower level coupled by the pi-polarized IR1 laser
  std::size_t other_level; // lower level coupled by UV (SD) or IR2 (DD)
  std::size_t upper;
};

struct DarkResonance {
  double center; // IR1 detuning, rad/s
  DarkKind kind;
  std::vector<DarkPair> pairs;
};

/// Positions of the dark resonances seen when scanning the IR1 detuning,
/// with the six lambda subsystems grouped by coincident dip centers.
std::vector<DarkResonance> dark_resonance_positions(const LevelStructure &s, double detuning_uv,
                                                    double detuning_ir2);

nlohmann::ordered_json to_json(const LevelStructure &s);

} // namespace rotdop
