#pragma once

// IR1 detuning sweeps, Lorentzian dip extraction, and the radial / angular /
// waist scans built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotdop/atom.hpp"
#include "rotdop/beams.hpp"
#include "rotdop/dynamics.hpp"

namespace rotdop {

struct MicromotionConfig {
  double velocity = 175.0;      // amplitude, m/s
  double direction = deg(74.0); // phi_mm, angle of the motion in the transverse plane
  double rf = mhz(22.135);
  double phase = 0.0;
};

enum class DipSelector { DDUpper, DDLower, SDUpper, SDLower };

std::string to_string(DipSelector d);
DipSelector dip_selector_from_string(const std::string &s);

struct SweepSettings {
  int prescan_points = 21;
  int fine_points = 81;
  double fine_halfwidth_fwhm = 4.0; // fine grid spans +-this many FWHM estimates
  DipSelector dip = DipSelector::DDUpper;
  /// Prescan half-width; 0 derives it from the expected power-broadened width.
  double prescan_halfwidth = 0.0;
};

struct BackgroundConfig {
  double level = 0.0;        // constant added to every fluorescence value
  double poisson_scale = 0.0; // > 0: counts = Poisson(scale * F) / scale
  std::uint64_t seed = 1;
};

struct PhysicalConfig {
  double field_gauss = 4.0;
  GFactors g;
  DecayRates decay;
  Dephasings dephasings;

  LaserDrive uv{DriveLabel::UV, mhz(-20.0), mhz(5.0), Polarization::SigmaPlusMinus,
                BeamGeometry::plane_wave(397e-9), 0.0, 0.0};
  Vec3 uv_direction{0.0, 0.0, 1.0};
  LaserDrive ir1{DriveLabel::IR1, mhz(30.0), mhz(8.0), Polarization::Pi,
                 BeamGeometry::laguerre_gauss(866e-9, um(20.0), 2), 0.0, 0.0};
  LaserDrive ir2{DriveLabel::IR2, mhz(30.0), mhz(8.0), Polarization::SigmaPlusMinus,
                 BeamGeometry::laguerre_gauss(866e-9, um(20.0), -2), 0.0, 0.0};
  /// Rabi frequencies are the local values at the ion (true) or the values at
  /// the beam's intensity maximum (false).
  bool equal_rabi = true;

  MicromotionConfig micromotion;
  Vec3 ion_position{0.0, 0.0, 0.0};
  EvolveSettings evolve;
  SweepSettings sweep;
  BackgroundConfig background;
  double r_min = um(0.5);

  LevelStructure structure() const;
  Vec3 velocity() const;
  /// Drives with IR1 at the given detuning, local Rabi frequencies and FM
  /// amplitudes evaluated at the ion position.
  std::vector<LaserDrive> drives(double detuning_ir1) const;
  /// Places both IR beam axes so the ion sits at radius r, azimuth phi from them.
  PhysicalConfig with_ion_at(double r, double phi) const;
  DriveClock clock(const std::vector<LaserDrive> &drives) const;
  /// Expected dip center (rad/s) for the selected dark resonance.
  double expected_center() const;
};

nlohmann::ordered_json to_json(const PhysicalConfig &c);
/// 16-hex-digit FNV-1a hash of the canonical JSON.
std::string fingerprint(const nlohmann::ordered_json &j);
std::string fingerprint(const PhysicalConfig &c);

struct Spectrum {
  std::vector<double> detunings; // rad/s, strictly increasing
  std::vector<double> fluorescence;
  std::string fingerprint;
  bool complete = true; // false when cancelled with allow_partial
};

class SweepError : public std::runtime_error {
public:
  SweepError(const std::string &what, double detuning)
      : std::runtime_error(what), detuning(detuning) {}
  double detuning;
};

/// One evolve + fluorescence per grid point, run on `jobs` threads. On
/// cancellation, throws Cancelled unless allow_partial, in which case only the
/// finished points are returned.
Spectrum sweep_spectrum(const PhysicalConfig &c, const std::vector<double> &grid, unsigned jobs = 1,
                        bool allow_partial = false);

/// Fluorescence at a single IR1 detuning (background and noise not applied).
double fluorescence_at(const PhysicalConfig &c, double detuning_ir1);

struct DipFit {
  double center = 0.0;
  double fwhm = 0.0;
  double baseline = 0.0; // model value at the center without the dip
  double floor = 0.0;
  double ratio = 0.0; // R = floor / baseline after background subtraction
  double depth = 0.0; // 1 - R
  double slope = 0.0; // linear baseline slope, per rad/s
  double sigma_center = 0.0;
  double sigma_fwhm = 0.0;
  double sigma_baseline = 0.0;
  double sigma_floor = 0.0;
  double sigma_ratio = 0.0;
  double sigma_depth = 0.0;
  double chi2 = 0.0;
  std::size_t points = 0;
};

class DipFitError : public std::runtime_error {
public:
  DipFitError(const std::string &what, double rms) : std::runtime_error(what), rms_residual(rms) {}
  double rms_residual;
};

/// Fits baseline + slope (x - c) - A / (1 + ((x - c) / w)^2) to the points with
/// |x - expected| <= halfwidth (all points when halfwidth <= 0).
DipFit fit_lorentzian_dip(const Spectrum &s, double expected_center = 0.0, double halfwidth = 0.0,
                          double background = 0.0);

struct DipMeasurement {
  Spectrum prescan;
  Spectrum fine;
  DipFit fit;
};

/// Coarse prescan around the expected center, then a fine grid of
/// +-fine_halfwidth_fwhm FWHM around the prescan minimum, then a fit.
DipMeasurement measure_dip(const PhysicalConfig &c, unsigned jobs = 1);

enum class RotationMode { CoRotating, CounterRotating };

std::string to_string(RotationMode m);

struct ScanPoint {
  double abscissa = 0.0; // r in m, or phi in rad
  bool valid = false;
  std::string error;
  DipFit fit;
  double relative_depth = 0.0; // depth / depth without motion at the same point
  double beam_intensity = 0.0; // fluorescence with IR1 off, IR2 at unscaled Rabi
};

struct ScanResult {
  std::string kind; // "radial" or "angular"
  std::vector<ScanPoint> points;
  std::string fingerprint;
};

/// IR beam windings set to (l, l) or (l, -l) from ir1's winding. The ion
/// sits at azimuth phi_mm - 90 deg from the beam axes so the motion is azimuthal.
ScanResult radial_scan(const PhysicalConfig &c, const std::vector<double> &radii, RotationMode mode,
                       bool equal_rabi, unsigned jobs = 1);

/// Ion at fixed radius r, azimuth phi (relative to the beam axes) swept.
ScanResult angular_scan(const PhysicalConfig &c, const std::vector<double> &phis, double r,
                        unsigned jobs = 1);

/// Two radial scans differing only in the IR waists.
std::pair<ScanResult, ScanResult> waist_comparison(const PhysicalConfig &c,
                                                   const std::vector<double> &radii,
                                                   double waist_a, double waist_b,
                                                   RotationMode mode = RotationMode::CounterRotating,
                                                   unsigned jobs = 1);

nlohmann::ordered_json to_json(const DipFit &f);

} // namespace rotdop
