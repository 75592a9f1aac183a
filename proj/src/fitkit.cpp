#include "rotdop/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "rotdop/parallel.hpp"
#include "rotdop/special.hpp"

namespace rotdop {

void DepthDataset::validate(double r_min) const {
  for (const auto &p : points) {
    if (!(p.sigma > 0.0)) throw ValidationError("depth uncertainties must be positive");
    if (p.r < r_min) throw ValidationError("dataset radius below r_min");
    if (!std::isfinite(p.depth)) throw ValidationError("non-finite depth in dataset");
  }
}

DepthDataset load_depth_dataset(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path);
  DepthDataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 || line.find_first_of("abcdefghijklmnopqrstuvwxyz") == 0) continue; // header
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    DepthPoint p;
    double r_um = 0.0;
    if (!(ss >> r_um >> p.depth >> p.sigma))
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected r_um,depth,sigma");
    p.r = um(r_um);
    d.points.push_back(p);
  }
  d.metadata["source"] = path;
  d.validate(0.0);
  return d;
}

void save_depth_dataset(const DepthDataset &d, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "r_um,depth,sigma\n";
  out.precision(17);
  for (const auto &p : d.points) out << p.r * 1e6 << ',' << p.depth << ',' << p.sigma << '\n';
}

double FitResult::value(const std::string &name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw std::out_of_range("no fit parameter " + name);
}

double FitResult::sigma(const std::string &name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return sigmas[i];
  throw std::out_of_range("no fit parameter " + name);
}

nlohmann::ordered_json to_json(const FitResult &f) {
  nlohmann::ordered_json j;
  auto &p = j["parameters"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < f.names.size(); ++i)
    p[f.names[i]] = {{"value", f.values[i]}, {"sigma", f.sigmas[i]}};
  j["chi2"] = f.chi2;
  j["nu"] = f.nu;
  j["seed_chi2"] = f.seed_chi2;
  auto &c = j["correlation"] = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < f.correlation.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(f.correlation.cols()));
    for (Eigen::Index k = 0; k < f.correlation.cols(); ++k) row[static_cast<std::size_t>(k)] = f.correlation(r, k);
    c.push_back(row);
  }
  j["converged"] = f.converged;
  j["message"] = f.message;
  j["evaluations"] = f.evaluations;
  return j;
}

double chi2_percentile(int nu, double p) { return chi2_quantile(nu, p); }

namespace {

FitResult make_result(const LsqResult &fit, std::vector<std::string> names, int nu) {
  FitResult out;
  out.names = std::move(names);
  out.values.assign(fit.x.data(), fit.x.data() + fit.x.size());
  out.chi2 = fit.chi2;
  out.seed_chi2 = fit.seed_chi2;
  out.nu = nu;
  out.converged = fit.converged;
  out.message = fit.message;
  out.evaluations = fit.evaluations;
  const double scale = (nu > 0 && fit.chi2 / nu > 1.0) ? fit.chi2 / nu : 1.0;
  for (Eigen::Index i = 0; i < fit.x.size(); ++i)
    out.sigmas.push_back(std::sqrt(std::max(fit.covariance(i, i), 0.0) * scale));
  out.correlation = correlation_from_covariance(fit.covariance);
  return out;
}

} // namespace

// ---------------------------------------------------------------- Bessel model

double bessel_depth_model(double r, double a, double b, double velocity, int l, double rf) {
  const double j0 = bessel_j(0, b * l * velocity / (r * rf));
  return a * j0 * j0;
}

FitResult fit_bessel_depth(const DepthDataset &data, const BesselFitOptions &opt) {
  if (data.points.size() < 3) throw ValidationError("Bessel fit needs at least 3 points");
  data.validate(0.0);
  const bool free_b = !opt.fixed_b.has_value();
  const auto &pts = data.points;

  auto model = [&](const Eigen::VectorXd &x, double r) {
    const double b = free_b ? x[1] : *opt.fixed_b;
    const double v = x[free_b ? 2 : 1];
    return bessel_depth_model(r, x[0], b, v, opt.l, opt.rf);
  };
  auto residuals = [&](const Eigen::VectorXd &x) {
    Eigen::VectorXd res(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
      res[static_cast<Eigen::Index>(i)] = (model(x, pts[i].r) - pts[i].depth) / pts[i].sigma;
    return res;
  };

  // Velocity seed from a coarse scan with the amplitude profiled out
  // analytically (the model is linear in a).
  const double b_seed = free_b ? 2.0 : *opt.fixed_b;
  double best_v = opt.seed_velocity, best_chi2 = 1e300, best_a = opt.seed_a;
  const int ngrid = 200;
  for (int k = 0; k <= ngrid; ++k) {
    const double v = opt.velocity_bound.lo + (opt.velocity_bound.hi - opt.velocity_bound.lo) * k / ngrid;
    double smm = 0.0, smd = 0.0;
    for (const auto &p : pts) {
      const double m = bessel_depth_model(p.r, 1.0, b_seed, v, opt.l, opt.rf);
      smm += m * m / (p.sigma * p.sigma);
      smd += m * p.depth / (p.sigma * p.sigma);
    }
    const double a = smm > 0.0 ? std::clamp(smd / smm, 1e-6, 1.9) : opt.seed_a;
    double chi2 = 0.0;
    for (const auto &p : pts) {
      const double d = (a * bessel_depth_model(p.r, 1.0, b_seed, v, opt.l, opt.rf) - p.depth) / p.sigma;
      chi2 += d * d;
    }
    if (chi2 < best_chi2) {
      best_chi2 = chi2;
      best_v = v;
      best_a = a;
    }
  }
  const double vspan = opt.velocity_bound.hi - opt.velocity_bound.lo;
  best_v = std::clamp(best_v, opt.velocity_bound.lo + 1e-6 * vspan, opt.velocity_bound.hi - 1e-6 * vspan);

  Eigen::VectorXd x0(free_b ? 3 : 2);
  x0[0] = best_a;
  if (free_b) x0[1] = b_seed;
  x0[free_b ? 2 : 1] = best_v;
  std::vector<Bound> bounds{{0.0, 2.0}};
  if (free_b) bounds.push_back({0.1, 10.0});
  bounds.push_back(opt.velocity_bound);
  LsqOptions lo;
  lo.max_iterations = 300;
  const auto fit = levenberg_marquardt(residuals, x0, bounds, lo);
  std::vector<std::string> names{"a"};
  if (free_b) names.push_back("b");
  names.push_back("velocity");
  return make_result(fit, names, static_cast<int>(pts.size()) - static_cast<int>(x0.size()));
}

// ---------------------------------------------------------------- full model

std::string to_string(FullParam p) {
  switch (p) {
  case FullParam::RabiUV: return "rabi_uv";
  case FullParam::RabiIR1: return "rabi_ir1";
  case FullParam::RabiIR2: return "rabi_ir2";
  case FullParam::Dephasing: return "dephasing";
  case FullParam::Velocity: return "velocity";
  }
  return "?";
}

FullModelOptions::FullModelOptions() {
  probe_evolve.transient = 5e-6;
  probe_evolve.window = 5e-6;
}

double FullParams::get(FullParam p) const {
  switch (p) {
  case FullParam::RabiUV: return rabi_uv;
  case FullParam::RabiIR1: return rabi_ir1;
  case FullParam::RabiIR2: return rabi_ir2;
  case FullParam::Dephasing: return dephasing;
  case FullParam::Velocity: return velocity;
  }
  return 0.0;
}

void FullParams::set(FullParam p, double v) {
  switch (p) {
  case FullParam::RabiUV: rabi_uv = v; break;
  case FullParam::RabiIR1: rabi_ir1 = v; break;
  case FullParam::RabiIR2: rabi_ir2 = v; break;
  case FullParam::Dephasing: dephasing = v; break;
  case FullParam::Velocity: velocity = v; break;
  }
}

DepthCache::DepthCache(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries_[j.at("key").get<std::string>()] = j.at("value").get<double>();
    } catch (const nlohmann::json::exception &) {
      // A torn last line from an interrupted run is skipped.
    }
  }
}

std::optional<double> DepthCache::get(const std::string &key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DepthCache::put(const std::string &key, double value) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[key] = value;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  nlohmann::json j{{"key", key}, {"value", value}};
  out << j.dump() << '\n';
}

std::size_t DepthCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

FullDepthModel::FullDepthModel(FullModelOptions opt, std::shared_ptr<DepthCache> cache)
    : opt_(std::move(opt)), cache_(cache ? std::move(cache) : std::make_shared<DepthCache>()) {}

PhysicalConfig FullDepthModel::config_for(const FullParams &p) const {
  PhysicalConfig c = opt_.base;
  c.uv.rabi = p.rabi_uv;
  c.ir1.rabi = p.rabi_ir1;
  c.ir2.rabi = p.rabi_ir2;
  bool found = false;
  for (auto &ch : c.dephasings.channels)
    if (ch.a == Manifold::D32 && ch.b == Manifold::D32) {
      ch.rate = p.dephasing;
      found = true;
    }
  if (!found) c.dephasings.channels.push_back({Manifold::D32, Manifold::D32, p.dephasing});
  c.micromotion.velocity = p.velocity;
  c.equal_rabi = true;
  const int l = c.ir1.beam.l();
  c.ir2.beam = c.ir2.beam.with_winding(opt_.mode == RotationMode::CoRotating ? l : -l);
  c.evolve = opt_.probe_evolve;
  c.evolve.periodic_warm_start = false;
  return c;
}

FullDepthModel::RestDip FullDepthModel::rest_dip(const PhysicalConfig &moving) const {
  PhysicalConfig c = moving;
  c.micromotion.velocity = 0.0;
  c.evolve.periodic_warm_start = true;
  c.evolve.transient = 0.5e-6;
  c.evolve.window = 2e-6;
  const std::string key = "rest:" + fingerprint(c);
  const auto cc = cache_->get(key + ":center");
  const auto cw = cache_->get(key + ":fwhm");
  if (cc && cw) return {*cc, *cw};
  const auto m = measure_dip(c);
  cache_->put(key + ":center", m.fit.center);
  cache_->put(key + ":fwhm", m.fit.fwhm);
  return {m.fit.center, m.fit.fwhm};
}

std::vector<double> FullDepthModel::depths(const FullParams &p, const std::vector<double> &radii) const {
  const PhysicalConfig base = config_for(p);
  // With equal local Rabi frequencies the at-rest dip does not depend on r.
  const RestDip rest = rest_dip(base.with_ion_at(radii.empty() ? um(20.0) : radii.front(),
                                                 base.micromotion.direction - deg(90.0)));
  const double k = opt_.probe_wing_fwhm;
  return parallel_map<double>(radii.size(), opt_.jobs, [&](std::size_t i) {
    const PhysicalConfig c = base.with_ion_at(radii[i], base.micromotion.direction - deg(90.0));
    nlohmann::ordered_json kj = to_json(c);
    kj["probe"] = {{"wing_fwhm", k}, {"center", rest.center}, {"fwhm", rest.fwhm}};
    const std::string key = "probe:" + fingerprint(kj);
    if (auto hit = cache_->get(key)) return *hit;
    const double w = k * rest.fwhm;
    const double fc = fluorescence_at(c, rest.center);
    const double fl = fluorescence_at(c, rest.center - w);
    const double fr = fluorescence_at(c, rest.center + w);
    // Lorentzian dip sampled at 0 and +-k FWHM: the wings still sit
    // A / (1 + 4 k^2) below the baseline; the linear slope cancels.
    const double q = 1.0 / (1.0 + 4.0 * k * k);
    const double fw = 0.5 * (fl + fr);
    const double amp = (fw - fc) / (1.0 - q);
    const double baseline = fw + amp * q;
    const double d = amp / baseline;
    cache_->put(key, d);
    return d;
  });
}

FitResult fit_full_model(const DepthDataset &data, const FullDepthModel &model, const FullParams &seed) {
  const auto &opt = model.options();
  const auto &free = opt.free;
  if (free.empty()) throw ValidationError("full-model fit needs at least one free parameter");
  if (data.points.size() < free.size() + 2)
    throw ValidationError("full-model fit needs at least n_free + 2 points");
  data.validate(opt.base.r_min);

  std::vector<double> radii;
  for (const auto &p : data.points) radii.push_back(p.r);
  auto unpack = [&](const Eigen::VectorXd &x) {
    FullParams p = seed;
    for (std::size_t i = 0; i < free.size(); ++i) p.set(free[i], x[static_cast<Eigen::Index>(i)]);
    return p;
  };
  auto residuals = [&](const Eigen::VectorXd &x) {
    const auto d = model.depths(unpack(x), radii);
    Eigen::VectorXd r(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = (d[i] - data.points[i].depth) / data.points[i].sigma;
    return r;
  };
  Eigen::VectorXd x0(static_cast<Eigen::Index>(free.size()));
  std::vector<Bound> bounds;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < free.size(); ++i) {
    x0[static_cast<Eigen::Index>(i)] = seed.get(free[i]);
    names.push_back(to_string(free[i]));
    switch (free[i]) {
    case FullParam::RabiUV:
    case FullParam::RabiIR1:
    case FullParam::RabiIR2: bounds.push_back(opt.rabi_bound); break;
    case FullParam::Dephasing: bounds.push_back(opt.dephasing_bound); break;
    case FullParam::Velocity: bounds.push_back(opt.velocity_bound); break;
    }
  }
  LsqOptions lo;
  lo.max_evaluations = opt.max_evaluations;
  lo.max_iterations = opt.max_iterations;
  lo.rel_step = opt.rel_step;
  lo.ftol = 1e-6;
  lo.xtol = 1e-6;
  const auto fit = levenberg_marquardt(residuals, x0, bounds, lo);
  return make_result(fit, names, static_cast<int>(data.points.size()) - static_cast<int>(free.size()));
}

// ---------------------------------------------------------------- intervals

IntervalScan velocity_interval_scan(const std::vector<double> &velocities, int n_points,
                                    int n_refit_params, const FixedVelocityFit &refit,
                                    double percentile,
                                    const std::function<bool(const FitResult &)> &plausible) {
  for (std::size_t i = 1; i < velocities.size(); ++i)
    if (!(velocities[i] > velocities[i - 1])) throw ValidationError("velocity grid must be sorted");
  IntervalScan out;
  out.nu = n_points - n_refit_params;
  if (out.nu < 1) throw ValidationError("interval scan needs nu >= 1");
  out.threshold = chi2_percentile(out.nu, percentile);
  const FitResult *prev = nullptr;
  for (double v : velocities) {
    if (cancel_flag().load()) break;
    IntervalRow row;
    row.velocity = v;
    row.fit = refit(v, prev);
    row.chi2 = row.fit.chi2;
    row.converged = row.fit.converged;
    row.plausible = plausible ? plausible(row.fit) : true;
    row.accepted = row.chi2 < out.threshold && row.plausible;
    if (row.accepted) {
      if (!out.lower) out.lower = v;
      out.upper = v;
    }
    out.rows.push_back(std::move(row));
    prev = &out.rows.back().fit;
  }
  return out;
}

IntervalScan bessel_interval_scan(const DepthDataset &data, const std::vector<double> &velocities,
                                  const BesselFitOptions &opt, double percentile) {
  const bool free_b = !opt.fixed_b.has_value();
  const auto &pts = data.points;
  auto refit = [&](double v, const FitResult *) {
    auto residuals = [&](const Eigen::VectorXd &x) {
      Eigen::VectorXd r(static_cast<Eigen::Index>(pts.size()));
      const double b = free_b ? x[1] : *opt.fixed_b;
      for (std::size_t i = 0; i < pts.size(); ++i)
        r[static_cast<Eigen::Index>(i)] =
            (bessel_depth_model(pts[i].r, x[0], b, v, opt.l, opt.rf) - pts[i].depth) / pts[i].sigma;
      return r;
    };
    Eigen::VectorXd x0(free_b ? 2 : 1);
    x0[0] = opt.seed_a;
    if (free_b) x0[1] = 2.0;
    std::vector<Bound> bounds{{0.0, 2.0}};
    if (free_b) bounds.push_back({0.1, 10.0});
    const auto fit = levenberg_marquardt(residuals, x0, bounds);
    std::vector<std::string> names{"a"};
    if (free_b) names.push_back("b");
    return make_result(fit, names, static_cast<int>(pts.size()) - static_cast<int>(x0.size()));
  };
  return velocity_interval_scan(velocities, static_cast<int>(pts.size()), free_b ? 2 : 1, refit,
                                percentile);
}

IntervalScan full_interval_scan(const DepthDataset &data, const FullDepthModel &model,
                                const std::vector<double> &velocities, const FullParams &seed,
                                double percentile,
                                const std::function<bool(const FitResult &)> &plausible) {
  FullModelOptions fixed_v = model.options();
  fixed_v.free.erase(std::remove(fixed_v.free.begin(), fixed_v.free.end(), FullParam::Velocity),
                     fixed_v.free.end());
  const FullDepthModel inner(fixed_v, model.cache());
  auto refit = [&](double v, const FitResult *prev) {
    FullParams s = seed;
    if (prev && prev->converged)
      for (std::size_t i = 0; i < prev->names.size(); ++i)
        for (auto p : fixed_v.free)
          if (to_string(p) == prev->names[i]) s.set(p, prev->values[i]);
    s.velocity = v;
    return fit_full_model(data, inner, s);
  };
  return velocity_interval_scan(velocities, static_cast<int>(data.points.size()),
                                static_cast<int>(fixed_v.free.size()), refit, percentile, plausible);
}

DepthDataset synthetic_dataset(const std::vector<double> &radii, const std::vector<double> &depths,
                               double noise, std::uint64_t seed) {
  if (radii.size() != depths.size()) throw ValidationError("radii and depths differ in length");
  if (!(noise > 0.0)) throw ValidationError("noise level must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  DepthDataset d;
  for (std::size_t i = 0; i < radii.size(); ++i) d.points.push_back({radii[i], depths[i] + gauss(rng), noise});
  d.metadata["synthetic"] = {{"noise", noise}, {"seed", seed}};
  return d;
}

SinusoidFit fit_sinusoid(const std::vector<double> &phis, const std::vector<double> &values, int harmonic) {
  if (phis.size() != values.size()) throw ValidationError("angles and values differ in length");
  if (phis.size() < 3) throw ValidationError("sinusoid fit needs at least 3 points");
  if (harmonic < 1) throw ValidationError("harmonic must be positive");
  const auto n = static_cast<Eigen::Index>(phis.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = harmonic * phis[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(x);
    a(i, 2) = std::sin(x);
    y[i] = values[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
  SinusoidFit f;
  f.harmonic = harmonic;
  f.offset = c[0];
  f.amplitude = std::hypot(c[1], c[2]);
  const double period = kTwoPi / harmonic;
  f.phase = std::fmod(std::atan2(c[2], c[1]) / harmonic + period, period);
  f.rms_residual = std::sqrt((a * c - y).squaredNorm() / static_cast<double>(n));
  return f;
}

} // namespace rotdop
