#include "rotdop/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>

#include "rotdop/lsq.hpp"
#include "rotdop/parallel.hpp"

namespace rotdop {

std::string to_string(DipSelector d) {
  switch (d) {
  case DipSelector::DDUpper: return "dd_upper";
  case DipSelector::DDLower: return "dd_lower";
  case DipSelector::SDUpper: return "sd_upper";
  case DipSelector::SDLower: return "sd_lower";
  }
  return "?";
}

DipSelector dip_selector_from_string(const std::string &s) {
  for (auto d : {DipSelector::DDUpper, DipSelector::DDLower, DipSelector::SDUpper, DipSelector::SDLower})
    if (to_string(d) == s) return d;
  throw ValidationError("unknown dip selector '" + s + "'");
}

std::string to_string(RotationMode m) {
  return m == RotationMode::CoRotating ? "co-rotating" : "counter-rotating";
}

LevelStructure PhysicalConfig::structure() const {
  return build_level_structure(field_gauss, g, decay, dephasings);
}

Vec3 PhysicalConfig::velocity() const {
  return {micromotion.velocity * std::cos(micromotion.direction),
          micromotion.velocity * std::sin(micromotion.direction), 0.0};
}

std::vector<LaserDrive> PhysicalConfig::drives(double detuning_ir1) const {
  const Vec3 v = velocity();
  const bool moving = v[0] != 0.0 || v[1] != 0.0 || v[2] != 0.0;
  auto local = [&](LaserDrive d) {
    d.fm_phase = micromotion.phase;
    if (d.label == DriveLabel::UV) {
      d.fm_amplitude = plane_wave_shift(d.beam.wavelength(), uv_direction, v);
      return d;
    }
    const auto kin = kinematics_from_cartesian(d.beam, ion_position, v);
    if (d.beam.mode() == BeamMode::LaguerreGauss && d.beam.l() != 0) {
      if (kin.azimuthal_singular)
        throw SingularityError("ion on the axis of the " + to_string(d.label) + " vortex beam");
      if (moving && kin.r < r_min)
        throw SingularityError(to_string(d.label) + " beam axis closer than r_min to the ion");
    }
    d.fm_amplitude = lg_doppler_shift(d.beam, kin);
    if (!equal_rabi && d.beam.mode() == BeamMode::LaguerreGauss)
      d.rabi *= std::sqrt(lg_intensity(d.beam, kin.r, kin.z));
    return d;
  };
  LaserDrive one = ir1;
  one.detuning = detuning_ir1;
  return {local(uv), local(one), local(ir2)};
}

PhysicalConfig PhysicalConfig::with_ion_at(double r, double phi) const {
  PhysicalConfig c = *this;
  const double x0 = ion_position[0] - r * std::cos(phi);
  const double y0 = ion_position[1] - r * std::sin(phi);
  c.ir1.beam = ir1.beam.with_center(x0, y0);
  c.ir2.beam = ir2.beam.with_center(x0, y0);
  return c;
}

DriveClock PhysicalConfig::clock(const std::vector<LaserDrive> &d) const {
  return DriveClock::from_drives(d, micromotion.rf);
}

double PhysicalConfig::expected_center() const {
  const auto dips = dark_resonance_positions(structure(), uv.detuning, ir2.detuning);
  const DarkKind kind =
      (sweep.dip == DipSelector::DDUpper || sweep.dip == DipSelector::DDLower) ? DarkKind::DD : DarkKind::SD;
  const bool upper = sweep.dip == DipSelector::DDUpper || sweep.dip == DipSelector::SDUpper;
  std::optional<double> best;
  for (const auto &d : dips) {
    if (d.kind != kind) continue;
    if (!best || (upper ? d.center > *best : d.center < *best)) best = d.center;
  }
  if (!best) throw ValidationError("no dark resonance of the selected kind");
  return *best;
}

std::string fingerprint(const nlohmann::ordered_json &j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fingerprint(const PhysicalConfig &c) { return fingerprint(to_json(c)); }

double fluorescence_at(const PhysicalConfig &c, double detuning_ir1) {
  const auto s = c.structure();
  const auto d = c.drives(detuning_ir1);
  const auto r = evolve(DensityState::pure(level::S_m12), s, d, c.clock(d), c.evolve);
  return fluorescence(r.populations);
}

Spectrum sweep_spectrum(const PhysicalConfig &c, const std::vector<double> &grid, unsigned jobs,
                        bool allow_partial) {
  if (grid.empty()) throw ValidationError("empty detuning grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ValidationError("detuning grid must be strictly increasing");
  const double ref = c.ir2.detuning;
  for (double x : grid)
    if (std::abs(x - ref) > mhz(100.0) && std::abs(x - c.uv.detuning) > mhz(100.0))
      throw ValidationError("detuning grid extends beyond 100 MHz from resonance");

  const auto s = c.structure();
  Spectrum out;
  out.detunings = grid;
  out.fingerprint = fingerprint(c);
  auto partial = parallel_map_partial<double>(grid.size(), jobs, [&](std::size_t i) {
    const auto d = c.drives(grid[i]);
    double f = 0.0;
    try {
      f = fluorescence(evolve(DensityState::pure(level::S_m12), s, d, c.clock(d), c.evolve).populations);
    } catch (const IntegrationError &e) {
      throw SweepError(std::string(e.what()) + " at IR1 detuning " + std::to_string(to_mhz(grid[i])) +
                           " MHz",
                       grid[i]);
    }
    f += c.background.level;
    if (c.background.poisson_scale > 0.0) {
      std::mt19937_64 rng(c.background.seed ^ (0x9E3779B97F4A7C15ull * (i + 1)));
      std::poisson_distribution<long long> pd(c.background.poisson_scale * f);
      f = static_cast<double>(pd(rng)) / c.background.poisson_scale;
    }
    return f;
  });
  out.detunings.clear();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!partial[i]) {
      if (!allow_partial) throw Cancelled();
      out.complete = false;
      continue;
    }
    out.detunings.push_back(grid[i]);
    out.fluorescence.push_back(*partial[i]);
  }
  return out;
}

// ---------------------------------------------------------------- dip fits

DipFit fit_lorentzian_dip(const Spectrum &s, double expected_center, double halfwidth,
                          double background) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < s.detunings.size(); ++i)
    if (halfwidth <= 0.0 || std::abs(s.detunings[i] - expected_center) <= halfwidth) {
      x.push_back(s.detunings[i]);
      y.push_back(s.fluorescence[i]);
    }
  const std::size_t n = x.size();
  if (n < 7) throw DipFitError("fit window holds fewer than 7 points", 0.0);

  const auto imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
  const std::size_t edge = std::max<std::size_t>(1, n / 10);
  std::vector<double> edges(y.begin(), y.begin() + static_cast<long>(edge));
  edges.insert(edges.end(), y.end() - static_cast<long>(edge), y.end());
  std::sort(edges.begin(), edges.end());
  const double base0 = edges[edges.size() / 2];
  const double amp0 = base0 - y[imin];
  if (imin == 0 || imin + 1 == n || !(amp0 > 1e-9 * std::abs(base0)))
    throw DipFitError("no local minimum inside the fit window", 0.0);

  // Half-maximum crossings for the width seed.
  const double half = base0 - 0.5 * amp0;
  auto crossing = [&](int dir) {
    for (auto i = static_cast<long>(imin); i >= 0 && i < static_cast<long>(n); i += dir) {
      const auto k = static_cast<std::size_t>(i);
      if (y[k] >= half) {
        const auto j = static_cast<std::size_t>(i - dir);
        const double t = (half - y[j]) / (y[k] - y[j]);
        return x[j] + t * (x[k] - x[j]);
      }
    }
    return x[dir > 0 ? n - 1 : 0];
  };
  double fwhm0 = crossing(+1) - crossing(-1);
  const double spacing = (x.back() - x.front()) / static_cast<double>(n - 1);
  fwhm0 = std::max(fwhm0, spacing);

  // Work in scaled units: abscissa in seed FWHMs around the minimum, ordinate
  // in units of the seed baseline.
  const double xs = fwhm0, x0 = x[imin], ys = std::abs(base0) > 0 ? std::abs(base0) : 1.0;
  Eigen::VectorXd u(static_cast<Eigen::Index>(n)), v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    u[static_cast<Eigen::Index>(i)] = (x[i] - x0) / xs;
    v[static_cast<Eigen::Index>(i)] = y[i] / ys;
  }
  // p = [baseline, slope, amplitude, center, half width]
  auto model = [](const Eigen::VectorXd &p, double t) {
    const double q = (t - p[3]) / p[4];
    return p[0] + p[1] * (t - p[3]) - p[2] / (1.0 + q * q);
  };
  auto residuals = [&](const Eigen::VectorXd &p) {
    Eigen::VectorXd r(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) r[i] = model(p, u[i]) - v[i];
    return r;
  };
  const double slope0 = (y.back() - y.front()) / (x.back() - x.front()) * xs / ys;
  Eigen::VectorXd p0(5);
  p0 << base0 / ys, slope0, amp0 / ys, 0.0, 0.5;
  const double umin = u.minCoeff(), umax = u.maxCoeff();
  const std::vector<Bound> bounds{{-1e3, 1e3}, {-1e3, 1e3}, {0.0, 1e3}, {umin, umax}, {1e-4, 1e3}};
  LsqOptions opt;
  opt.max_iterations = 500;
  opt.ftol = 1e-15;
  opt.rel_step = 1e-7;
  const auto fit = levenberg_marquardt(residuals, p0, bounds, opt);
  const double rms = std::sqrt(fit.chi2 / static_cast<double>(n)) * ys;
  if (!fit.converged) throw DipFitError("Lorentzian fit did not converge: " + fit.message, rms);

  const Eigen::VectorXd &p = fit.x;
  const double dof = static_cast<double>(n) - 5.0;
  const Eigen::MatrixXd cov = fit.covariance * (fit.chi2 / dof);
  auto sd = [&](int i) { return std::sqrt(std::max(cov(i, i), 0.0)); };

  DipFit out;
  out.points = n;
  out.chi2 = fit.chi2 * ys * ys;
  out.center = x0 + p[3] * xs;
  out.sigma_center = sd(3) * xs;
  out.fwhm = 2.0 * p[4] * xs;
  out.sigma_fwhm = 2.0 * sd(4) * xs;
  out.baseline = p[0] * ys;
  out.sigma_baseline = sd(0) * ys;
  out.floor = (p[0] - p[2]) * ys;
  out.sigma_floor = std::sqrt(std::max(cov(0, 0) + cov(2, 2) - 2.0 * cov(0, 2), 0.0)) * ys;
  out.slope = p[1] * ys / xs;
  const double b = out.baseline - background;
  if (!(b > 0.0)) throw DipFitError("baseline not above background", rms);
  const double a = p[2] * ys;
  out.depth = a / b;
  out.ratio = 1.0 - out.depth;
  // d = A / (B - bg): gradient with respect to (B, A) in scaled units.
  const double gb = -a / (b * b) * ys, ga = 1.0 / b * ys;
  out.sigma_depth =
      std::sqrt(std::max(gb * gb * cov(0, 0) + ga * ga * cov(2, 2) + 2.0 * gb * ga * cov(0, 2), 0.0));
  out.sigma_ratio = out.sigma_depth;
  if (!(out.fwhm > 0.0)) throw DipFitError("non-positive fitted width", rms);
  return out;
}

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return g;
}

// Power-broadened width of the selected dark resonance, used to size the prescan.
double expected_width(const PhysicalConfig &c, const std::vector<LaserDrive> &d) {
  const double gam = c.decay.p_to_s + c.decay.p_to_d;
  const bool dd = c.sweep.dip == DipSelector::DDUpper || c.sweep.dip == DipSelector::DDLower;
  const double o1 = d[1].rabi, o2 = dd ? d[2].rabi : d[0].rabi;
  const double delta = dd ? d[2].detuning : d[0].detuning;
  double w = (o1 * o1 + o2 * o2) * gam / (gam * gam + 4.0 * delta * delta);
  for (const auto &ch : c.dephasings.channels) {
    const bool match = dd ? (ch.a == Manifold::D32 && ch.b == Manifold::D32)
                          : ((ch.a == Manifold::S12 && ch.b == Manifold::D32) ||
                             (ch.a == Manifold::D32 && ch.b == Manifold::S12));
    if (match) w += 2.0 * ch.rate;
  }
  return std::max(w + 2.0 * c.dephasings.depolarizing, khz(0.01));
}

} // namespace

DipMeasurement measure_dip(const PhysicalConfig &c, unsigned jobs) {
  if (c.sweep.prescan_points < 7 || c.sweep.fine_points < 7)
    throw ValidationError("prescan and fine grids need at least 7 points");
  DipMeasurement m;
  const double c0 = c.expected_center();
  const double hw = c.sweep.prescan_halfwidth > 0.0 ? c.sweep.prescan_halfwidth
                                                    : 10.0 * expected_width(c, c.drives(c0));
  m.prescan = sweep_spectrum(c, linspace(c0 - hw, c0 + hw, c.sweep.prescan_points), jobs);
  const auto &f = m.prescan.fluorescence;
  const auto imin = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  const double spacing = 2.0 * hw / (c.sweep.prescan_points - 1);
  // FWHM estimate from half-maximum crossings of the prescan.
  const double base = std::max(f.front(), f.back());
  const double half = 0.5 * (base + f[imin]);
  std::size_t lo = imin, hi = imin;
  while (lo > 0 && f[lo] < half) --lo;
  while (hi + 1 < f.size() && f[hi] < half) ++hi;
  const double fwhm = std::max(static_cast<double>(hi - lo) * spacing - spacing, spacing);
  const double center = m.prescan.detunings[imin];
  const double fine_hw = c.sweep.fine_halfwidth_fwhm * fwhm;
  m.fine = sweep_spectrum(c, linspace(center - fine_hw, center + fine_hw, c.sweep.fine_points), jobs);
  m.fit = fit_lorentzian_dip(m.fine, center, 0.0, c.background.level);
  return m;
}

// ---------------------------------------------------------------- scans

namespace {

ScanPoint scan_point(const PhysicalConfig &cfg, double abscissa, const std::optional<double> &ref_depth,
                     const PhysicalConfig *ref_cfg) {
  ScanPoint pt;
  pt.abscissa = abscissa;
  try {
    pt.fit = measure_dip(cfg).fit;
    double ref = 0.0;
    if (ref_depth)
      ref = *ref_depth;
    else
      ref = measure_dip(*ref_cfg).fit.depth;
    pt.relative_depth = pt.fit.depth / ref;
    pt.valid = true;
  } catch (const DipFitError &e) {
    pt.error = e.what();
  } catch (const SweepError &e) {
    pt.error = e.what();
  } catch (const SingularityError &e) {
    pt.error = e.what();
  }
  try {
    PhysicalConfig single = cfg;
    single.ir1.rabi = 0.0;
    single.equal_rabi = false;
    pt.beam_intensity = fluorescence_at(single, single.ir2.detuning);
  } catch (const std::exception &) {
    pt.beam_intensity = std::nan("");
  }
  return pt;
}

PhysicalConfig at_rest(PhysicalConfig c) {
  c.micromotion.velocity = 0.0;
  return c;
}

ScanResult run_scan(const std::string &kind, const std::vector<PhysicalConfig> &cfgs,
                    const std::vector<double> &abscissa, bool equal_rabi, unsigned jobs,
                    const std::string &fp) {
  // Without motion and with fixed local Rabi frequencies every point has the
  // same reference, so it is measured once.
  std::optional<double> shared_ref;
  if (equal_rabi && !cfgs.empty()) {
    try {
      shared_ref = measure_dip(at_rest(cfgs.front())).fit.depth;
    } catch (const std::exception &) {
      shared_ref.reset();
    }
  }
  ScanResult out;
  out.kind = kind;
  out.fingerprint = fp;
  auto partial = parallel_map_partial<ScanPoint>(cfgs.size(), jobs, [&](std::size_t i) {
    const PhysicalConfig ref = at_rest(cfgs[i]);
    return scan_point(cfgs[i], abscissa[i], shared_ref, &ref);
  });
  for (std::size_t i = 0; i < partial.size(); ++i) {
    if (partial[i]) {
      out.points.push_back(std::move(*partial[i]));
    } else {
      ScanPoint pt;
      pt.abscissa = abscissa[i];
      pt.error = "cancelled";
      out.points.push_back(pt);
    }
  }
  return out;
}

} // namespace

ScanResult radial_scan(const PhysicalConfig &c, const std::vector<double> &radii, RotationMode mode,
                       bool equal_rabi, unsigned jobs) {
  PhysicalConfig base = c;
  base.equal_rabi = equal_rabi;
  const int l = c.ir1.beam.l();
  base.ir2.beam = c.ir2.beam.with_winding(mode == RotationMode::CoRotating ? l : -l);
  const double phi = c.micromotion.direction - deg(90.0);
  std::vector<PhysicalConfig> cfgs;
  for (double r : radii) {
    if (r < c.r_min) throw ValidationError("scan radius below r_min");
    cfgs.push_back(base.with_ion_at(r, phi));
  }
  nlohmann::ordered_json fj = to_json(base);
  fj["scan"] = {{"kind", "radial"}, {"mode", to_string(mode)}, {"radii_m", radii}};
  return run_scan("radial", cfgs, radii, equal_rabi, jobs, fingerprint(fj));
}

ScanResult angular_scan(const PhysicalConfig &c, const std::vector<double> &phis, double r,
                        unsigned jobs) {
  if (r < c.r_min) throw ValidationError("scan radius below r_min");
  std::vector<PhysicalConfig> cfgs;
  for (double phi : phis) cfgs.push_back(c.with_ion_at(r, phi));
  nlohmann::ordered_json fj = to_json(c);
  fj["scan"] = {{"kind", "angular"}, {"radius_m", r}, {"phis_rad", phis}};
  return run_scan("angular", cfgs, phis, c.equal_rabi, jobs, fingerprint(fj));
}

std::pair<ScanResult, ScanResult> waist_comparison(const PhysicalConfig &c,
                                                   const std::vector<double> &radii,
                                                   double waist_a, double waist_b,
                                                   RotationMode mode, unsigned jobs) {
  auto with_waist = [&](double w) {
    PhysicalConfig x = c;
    x.ir1.beam = c.ir1.beam.with_waist(w);
    x.ir2.beam = c.ir2.beam.with_waist(w);
    return x;
  };
  return {radial_scan(with_waist(waist_a), radii, mode, true, jobs),
          radial_scan(with_waist(waist_b), radii, mode, true, jobs)};
}

nlohmann::ordered_json to_json(const DipFit &f) {
  nlohmann::ordered_json j;
  j["center_mhz"] = to_mhz(f.center);
  j["sigma_center_mhz"] = to_mhz(f.sigma_center);
  j["fwhm_mhz"] = to_mhz(f.fwhm);
  j["sigma_fwhm_mhz"] = to_mhz(f.sigma_fwhm);
  j["baseline"] = f.baseline;
  j["sigma_baseline"] = f.sigma_baseline;
  j["floor"] = f.floor;
  j["sigma_floor"] = f.sigma_floor;
  j["ratio"] = f.ratio;
  j["sigma_ratio"] = f.sigma_ratio;
  j["depth"] = f.depth;
  j["sigma_depth"] = f.sigma_depth;
  j["slope_per_mhz"] = f.slope * mhz(1.0);
  j["chi2"] = f.chi2;
  j["points"] = f.points;
  return j;
}

} // namespace rotdop
