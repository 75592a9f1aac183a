#pragma once

// JSON run configuration. Keys carry their units (detuning_mhz, waist_um, ...);
// conversion to SI / rad/s happens here and nowhere else.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotdop/analytic.hpp"
#include "rotdop/fitkit.hpp"
#include "rotdop/spectra.hpp"

namespace rotdop {

class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string &what, std::string field = {}, std::size_t line = 0)
      : std::runtime_error(what), field(std::move(field)), line(line) {}
  std::string field;
  std::size_t line; // 1-based, 0 when unknown
};

struct SpectrumSettings {
  std::optional<double> center; // rad/s; defaults to Delta_IR2
  double halfwidth = mhz(8.0);
  int points = 81;
};

struct ScanSettings {
  std::vector<double> radii;  // m
  RotationMode mode = RotationMode::CounterRotating;
  bool equal_rabi = true;
  std::vector<double> angles; // rad
  double angular_radius = um(42.0);
  double waist_a = um(15.0);
  double waist_b = um(27.0);

  ScanSettings();
};

struct FitSettings {
  std::string dataset; // CSV path, relative to the config file
  BesselFitOptions bessel;
  std::vector<double> velocities; // interval-scan grid, m/s
  double percentile = 0.90;
  std::string model = "bessel"; // or "full"
  FullParams seed;
  std::vector<FullParam> free{FullParam::RabiUV, FullParam::RabiIR1, FullParam::RabiIR2,
                              FullParam::Dephasing, FullParam::Velocity};
  EvolveSettings probe_evolve;
  std::size_t max_evaluations = 200;
  std::string cache; // relative to the output directory; empty disables
  Bound rabi_bound{mhz(1.0), mhz(20.0)};
  Bound dephasing_bound{0.0, khz(100.0)};
  Bound velocity_bound{0.0, 500.0};
  /// Plausibility band for accepted interval rows (full model only).
  Bound plausible_rabi{mhz(7.0), mhz(9.0)};

  FitSettings();
};

struct AnalyticSettings {
  ThreeLevelParams params;
  double gamma_tilde = 1e-3;
  std::vector<double> betas;
  std::optional<double> fixed_b;

  AnalyticSettings();
};

struct RunConfig {
  PhysicalConfig physical;
  SpectrumSettings spectrum;
  ScanSettings scan;
  FitSettings fit;
  AnalyticSettings analytic;
  std::uint64_t seed = 1;
  std::string base_dir = "."; // directory of the config file
};

/// Parses a config document. Missing sections other than the required
/// atom/beams/drives fall back to defaults. Throws ConfigError.
RunConfig parse_run_config(const std::string &text, const std::string &base_dir = ".");
RunConfig load_run_config(const std::string &path);

/// Physical sections in the same schema parse_run_config reads.
nlohmann::ordered_json to_json(const PhysicalConfig &c);
PhysicalConfig physical_config_from_json(const nlohmann::json &j);

nlohmann::ordered_json to_json(const RunConfig &c);

} // namespace rotdop
