#pragma once

// Depth-versus-radius fitting: Bessel approximation, full 8-level model, and
// the chi-squared velocity-interval scan.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "rotdop/lsq.hpp"
#include "rotdop/spectra.hpp"

namespace rotdop {

struct DepthPoint {
  double r = 0.0;     // m
  double depth = 0.0;
  double sigma = 0.0; // 1 sigma uncertainty of depth
};

struct DepthDataset {
  std::vector<DepthPoint> points;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  /// Throws ValidationError when any sigma <= 0 or r < r_min.
  void validate(double r_min = um(0.5)) const;
};

/// CSV with header r_um,depth,sigma.
DepthDataset load_depth_dataset(const std::string &path);
void save_depth_dataset(const DepthDataset &d, const std::string &path);

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> sigmas; // scaled by sqrt(chi2/nu) when chi2/nu > 1
  double chi2 = 0.0;
  int nu = 0;
  Eigen::MatrixXd correlation;
  bool converged = false;
  std::string message;
  std::size_t evaluations = 0;
  double seed_chi2 = 0.0;

  double value(const std::string &name) const;
  double sigma(const std::string &name) const;
};

nlohmann::ordered_json to_json(const FitResult &f);

/// p-quantile of chi^2 with nu degrees of freedom (threshold for the interval scan).
double chi2_percentile(int nu, double p);

struct BesselFitOptions {
  int l = 2;
  double rf = mhz(22.135);
  /// Scale b of J0^2(b beta); empty frees it.
  std::optional<double> fixed_b = 2.0;
  double seed_a = 0.8;
  double seed_velocity = 150.0;
  Bound velocity_bound{0.0, 500.0};
};

/// d(r) = a J0^2(b beta(r; v)) with the single-beam beta = l v / (r Omega_RF).
double bessel_depth_model(double r, double a, double b, double velocity, int l, double rf);

/// Weighted fit of (a, v) or (a, b, v). Throws ValidationError for fewer than 3 points.
FitResult fit_bessel_depth(const DepthDataset &data, const BesselFitOptions &opt = {});

/// Parameters the full-model fit may vary.
enum class FullParam { RabiUV, RabiIR1, RabiIR2, Dephasing, Velocity };

std::string to_string(FullParam p);

struct FullModelOptions {
  PhysicalConfig base;
  RotationMode mode = RotationMode::CounterRotating;
  std::vector<FullParam> free{FullParam::RabiUV, FullParam::RabiIR1, FullParam::RabiIR2,
                              FullParam::Dephasing, FullParam::Velocity};
  /// Dynamics settings for residual evaluations (shorter than a spectrum's).
  EvolveSettings probe_evolve;
  /// Wing offset of the depth probe, in units of the at-rest FWHM.
  double probe_wing_fwhm = 4.0;
  Bound rabi_bound{mhz(1.0), mhz(20.0)};
  Bound dephasing_bound{0.0, khz(100.0)};
  Bound velocity_bound{0.0, 500.0};
  std::size_t max_evaluations = 200;
  int max_iterations = 30;
  double rel_step = 1e-3;
  /// On-disk cache file (JSON lines); empty disables persistence.
  std::string cache_path;
  unsigned jobs = 1;

  FullModelOptions();
};

/// Full-model parameter vector in a fixed order (UV, IR1, IR2, dephasing, v).
struct FullParams {
  double rabi_uv = mhz(5.0);
  double rabi_ir1 = mhz(8.0);
  double rabi_ir2 = mhz(8.0);
  double dephasing = 0.0; // D-D dephasing, rad/s
  double velocity = 175.0;

  double get(FullParam p) const;
  void set(FullParam p, double v);
};

/// Thread-safe memo of simulated depths keyed by (config fingerprint, r),
/// optionally persisted as JSON lines. Entries are deterministic, so
/// concurrent writers of the same key are harmless.
class DepthCache {
public:
  explicit DepthCache(std::string path = {});
  std::optional<double> get(const std::string &key) const;
  void put(const std::string &key, double depth);
  std::size_t size() const;

private:
  std::string path_;
  mutable std::mutex mutex_;
  std::map<std::string, double> entries_;
};

/// Evaluates the full 8-level model's dip depth along a radial scan with a
/// three-point probe (centre and two wings at the at-rest centre/FWHM).
class FullDepthModel {
public:
  FullDepthModel(FullModelOptions opt, std::shared_ptr<DepthCache> cache);

  PhysicalConfig config_for(const FullParams &p) const;
  /// Depths at the given radii; parallel over radii with opt.jobs threads.
  std::vector<double> depths(const FullParams &p, const std::vector<double> &radii) const;
  const FullModelOptions &options() const { return opt_; }
  std::shared_ptr<DepthCache> cache() const { return cache_; }

private:
  struct RestDip {
    double center;
    double fwhm;
  };
  RestDip rest_dip(const PhysicalConfig &c) const;

  FullModelOptions opt_;
  std::shared_ptr<DepthCache> cache_;
};

/// Weighted fit of the free parameters of `opt.free`, starting at `seed`.
/// Returns an unconverged result (not an exception) on budget exhaustion.
FitResult fit_full_model(const DepthDataset &data, const FullDepthModel &model, const FullParams &seed);

struct IntervalRow {
  double velocity = 0.0;
  double chi2 = 0.0;
  bool accepted = false;
  bool plausible = true; // fitted parameters inside the plausibility bounds
  bool converged = false;
  FitResult fit;
};

struct IntervalScan {
  int nu = 0;
  double threshold = 0.0;
  std::vector<IntervalRow> rows;
  std::optional<double> lower, upper; // extremes of the accepted velocities
};

/// Refits everything except the velocity at each grid velocity, using the
/// supplied refit function; the accepted set is chi2 < chi2_percentile(nu, p)
/// with nu = n_points - n_refit_params.
using FixedVelocityFit = std::function<FitResult(double velocity, const FitResult *previous)>;
IntervalScan velocity_interval_scan(const std::vector<double> &velocities, int n_points,
                                    int n_refit_params, const FixedVelocityFit &refit,
                                    double percentile = 0.90,
                                    const std::function<bool(const FitResult &)> &plausible = {});

/// Interval scan with the Bessel model, refitting a (and b when free).
IntervalScan bessel_interval_scan(const DepthDataset &data, const std::vector<double> &velocities,
                                  const BesselFitOptions &opt = {}, double percentile = 0.90);

/// Interval scan with the full model, refitting opt.free minus the velocity.
IntervalScan full_interval_scan(const DepthDataset &data, const FullDepthModel &model,
                                const std::vector<double> &velocities, const FullParams &seed,
                                double percentile = 0.90,
                                const std::function<bool(const FitResult &)> &plausible = {});

/// Synthetic dataset d_i = model(r_i) + N(0, sigma) with sigma = noise (absolute).
DepthDataset synthetic_dataset(const std::vector<double> &radii, const std::vector<double> &depths,
                               double noise, std::uint64_t seed);

/// Linear least-squares fit of y = offset + amplitude cos(h (phi - phase)),
/// amplitude >= 0, so `phase` is a maximum (the others follow every 2 pi / h).
struct SinusoidFit {
  double offset = 0.0;
  double amplitude = 0.0;
  double phase = 0.0; // rad, in [0, 2 pi / h)
  int harmonic = 2;
  double rms_residual = 0.0;
};

SinusoidFit fit_sinusoid(const std::vector<double> &phis, const std::vector<double> &values, int harmonic = 2);

} // namespace rotdop
