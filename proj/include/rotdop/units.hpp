#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

namespace rotdop {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bohr magneton over Planck constant, in MHz per gauss (CODATA 2018).
inline constexpr double kBohrMHzPerGauss = 1.39962449361;

/// Angular frequency (rad/s) from a frequency given in MHz.
constexpr double mhz(double f) { return kTwoPi * f * 1e6; }
/// Angular frequency (rad/s) from a frequency given in kHz.
constexpr double khz(double f) { return kTwoPi * f * 1e3; }
/// Inverse of mhz().
constexpr double to_mhz(double w) { return w / (kTwoPi * 1e6); }

constexpr double um(double x) { return x * 1e-6; }
constexpr double deg(double a) { return a * kPi / 180.0; }
constexpr double to_deg(double a) { return a * 180.0 / kPi; }

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a geometric quantity diverges (e.g. azimuthal term on the beam axis).
class SingularityError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace rotdop
