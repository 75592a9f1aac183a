#include "rotdop/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rotdop {

namespace {

std::vector<double> arange(double a, double b, double step) {
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

// Typed access with dotted-path diagnostics.
class Reader {
public:
  Reader(const nlohmann::json &j, std::string path, const std::string *text)
      : j_(j), path_(std::move(path)), text_(text) {}

  bool has(const std::string &key) const { return j_.is_object() && j_.contains(key); }

  Reader section(const std::string &key, bool required = false) const {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!has(key)) {
      if (required) fail(key, "missing required section '" + full(key) + "'");
      return Reader(empty, full(key), text_);
    }
    if (!j_.at(key).is_object()) fail(key, "'" + full(key) + "' must be an object");
    return Reader(j_.at(key), full(key), text_);
  }

  double number(const std::string &key, double def) const {
    if (!has(key)) return def;
    const auto &v = j_.at(key);
    if (!v.is_number()) fail(key, "'" + full(key) + "' must be a number");
    return v.get<double>();
  }

  std::optional<double> optional_number(const std::string &key) const {
    if (!has(key) || j_.at(key).is_null()) return std::nullopt;
    return number(key, 0.0);
  }

  int integer(const std::string &key, int def) const {
    if (!has(key)) return def;
    const auto &v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "'" + full(key) + "' must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string &key, bool def) const {
    if (!has(key)) return def;
    const auto &v = j_.at(key);
    if (!v.is_boolean()) fail(key, "'" + full(key) + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string &key, const std::string &def) const {
    if (!has(key)) return def;
    const auto &v = j_.at(key);
    if (!v.is_string()) fail(key, "'" + full(key) + "' must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string &key, std::vector<double> def) const {
    if (!has(key)) return def;
    const auto &v = j_.at(key);
    // Either an explicit list or {start, stop, step}.
    if (v.is_object()) {
      const Reader r(v, full(key), text_);
      const double step = r.number("step", 0.0);
      if (!(step > 0.0)) fail(key, "'" + full(key) + ".step' must be positive");
      return arange(r.number("start", 0.0), r.number("stop", 0.0), step);
    }
    if (!v.is_array()) fail(key, "'" + full(key) + "' must be a list of numbers or {start, stop, step}");
    std::vector<double> out;
    for (const auto &e : v) {
      if (!e.is_number()) fail(key, "'" + full(key) + "' must contain only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  [[noreturn]] void fail(const std::string &key, const std::string &msg) const {
    throw ConfigError(msg, full(key), locate(key));
  }

  template <class F> auto guard(const std::string &key, F &&f) const {
    try {
      return f();
    } catch (const ValidationError &e) {
      fail(key, "'" + full(key) + "': " + e.what());
    }
  }

private:
  std::string full(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  // Best-effort line of the key: the first occurrence of each path component in order.
  std::size_t locate(const std::string &key) const {
    if (!text_) return 0;
    std::size_t pos = 0;
    std::stringstream ss(full(key));
    std::string part;
    bool found_all = true;
    while (std::getline(ss, part, '.')) {
      const auto p = text_->find("\"" + part + "\"", pos);
      if (p == std::string::npos) {
        found_all = false;
        break;
      }
      pos = p;
    }
    if (!found_all && pos == 0) return 0;
    return static_cast<std::size_t>(std::count(text_->begin(), text_->begin() + static_cast<long>(pos), '\n')) + 1;
  }

  const nlohmann::json &j_;
  std::string path_;
  const std::string *text_;
};

Polarization polarization_from(const Reader &r, const std::string &key, Polarization def) {
  const std::string s = r.string(key, def == Polarization::Pi ? "pi" : "sigma");
  if (s == "pi") return Polarization::Pi;
  if (s == "sigma" || s == "sigma+-") return Polarization::SigmaPlusMinus;
  r.fail(key, "polarization must be 'pi' or 'sigma'");
}

Manifold manifold_from(const Reader &r, const std::string &key, const std::string &s) {
  if (s == "S12" || s == "S") return Manifold::S12;
  if (s == "D32" || s == "D") return Manifold::D32;
  if (s == "P12" || s == "P") return Manifold::P12;
  r.fail(key, "unknown manifold '" + s + "'");
}

BeamGeometry beam_from(const Reader &r, const BeamGeometry &def) {
  const std::string mode = r.string("mode", def.mode() == BeamMode::PlaneWave ? "plane" : "lg");
  const double lambda = r.number("wavelength_nm", def.wavelength() * 1e9) * 1e-9;
  return r.guard("mode", [&] {
    if (mode == "plane") return BeamGeometry::plane_wave(lambda);
    if (mode != "lg") r.fail("mode", "beam mode must be 'lg' or 'plane'");
    const auto off = r.numbers("offset_um", {def.x0() * 1e6, def.y0() * 1e6});
    if (off.size() != 2) r.fail("offset_um", "offset_um needs two entries");
    return BeamGeometry::laguerre_gauss(lambda, um(r.number("waist_um", def.waist() > 0 ? def.waist() * 1e6 : 20.0)),
                                        r.integer("l", def.l()), r.integer("p", def.p()), um(off[0]),
                                        um(off[1]));
  });
}

void drive_from(const Reader &r, LaserDrive &d) {
  d.detuning = mhz(r.number("detuning_mhz", to_mhz(d.detuning)));
  d.rabi = mhz(r.number("rabi_mhz", to_mhz(d.rabi)));
  d.polarization = polarization_from(r, "polarization", d.polarization);
  if (d.rabi < 0.0) r.fail("rabi_mhz", "Rabi frequency must be non-negative");
}

std::string to_string_mode(RotationMode m) { return m == RotationMode::CoRotating ? "co" : "counter"; }

nlohmann::ordered_json beam_json(const BeamGeometry &b) {
  nlohmann::ordered_json j;
  j["mode"] = b.mode() == BeamMode::PlaneWave ? "plane" : "lg";
  j["wavelength_nm"] = b.wavelength() * 1e9;
  if (b.mode() == BeamMode::LaguerreGauss) {
    j["waist_um"] = b.waist() * 1e6;
    j["l"] = b.l();
    j["p"] = b.p();
    j["offset_um"] = {b.x0() * 1e6, b.y0() * 1e6};
  }
  return j;
}

nlohmann::ordered_json drive_json(const LaserDrive &d) {
  return {{"detuning_mhz", to_mhz(d.detuning)},
          {"rabi_mhz", to_mhz(d.rabi)},
          {"polarization", d.polarization == Polarization::Pi ? "pi" : "sigma"}};
}

PhysicalConfig physical_from(const Reader &root, bool require) {
  PhysicalConfig c;
  const Reader atom = root.section("atom", require);
  c.field_gauss = atom.number("field_gauss", c.field_gauss);
  c.g.s = atom.number("g_s", c.g.s);
  c.g.d = atom.number("g_d", c.g.d);
  c.g.p = atom.number("g_p", c.g.p);
  c.decay.p_to_s = mhz(atom.number("gamma_ps_mhz", to_mhz(c.decay.p_to_s)));
  c.decay.p_to_d = mhz(atom.number("gamma_pd_mhz", to_mhz(c.decay.p_to_d)));
  c.dephasings.depolarizing = khz(atom.number("depolarizing_khz", 0.0));
  atom.guard("field_gauss", [&] { return c.structure(), 0; });

  const Reader beams = root.section("beams", require);
  const Reader buv = beams.section("uv");
  c.uv.beam = BeamGeometry::plane_wave(buv.number("wavelength_nm", 397.0) * 1e-9);
  const auto dir = buv.numbers("direction", {0.0, 0.0, 1.0});
  if (dir.size() != 3) buv.fail("direction", "direction needs three entries");
  const double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  if (!(n > 0.0)) buv.fail("direction", "direction must be non-zero");
  c.uv_direction = {dir[0] / n, dir[1] / n, dir[2] / n};
  c.ir1.beam = beam_from(beams.section("ir1"), c.ir1.beam);
  c.ir2.beam = beam_from(beams.section("ir2"), c.ir2.beam);

  const Reader drives = root.section("drives", require);
  drive_from(drives.section("uv"), c.uv);
  drive_from(drives.section("ir1"), c.ir1);
  drive_from(drives.section("ir2"), c.ir2);
  c.equal_rabi = drives.boolean("equal_rabi", c.equal_rabi);

  const Reader mm = root.section("micromotion");
  c.micromotion.velocity = mm.number("velocity_m_s", c.micromotion.velocity);
  c.micromotion.direction = deg(mm.number("direction_deg", to_deg(c.micromotion.direction)));
  c.micromotion.rf = mhz(mm.number("rf_mhz", to_mhz(c.micromotion.rf)));
  c.micromotion.phase = deg(mm.number("phase_deg", to_deg(c.micromotion.phase)));
  if (!(c.micromotion.rf > 0.0)) mm.fail("rf_mhz", "RF frequency must be positive");

  const Reader ion = root.section("ion");
  const auto pos = ion.numbers("position_um", {0.0, 0.0, 0.0});
  if (pos.size() != 3) ion.fail("position_um", "position_um needs three entries");
  c.ion_position = {um(pos[0]), um(pos[1]), um(pos[2])};
  c.r_min = um(ion.number("r_min_um", c.r_min * 1e6));

  const Reader dyn = root.section("dynamics");
  c.evolve.transient = dyn.number("transient_us", c.evolve.transient * 1e6) * 1e-6;
  c.evolve.window = dyn.number("window_us", c.evolve.window * 1e6) * 1e-6;
  c.evolve.rtol = dyn.number("rtol", c.evolve.rtol);
  c.evolve.atol = dyn.number("atol", c.evolve.atol);
  c.evolve.snap_window = dyn.boolean("snap_window", c.evolve.snap_window);
  c.evolve.eigen_check_stride = static_cast<std::size_t>(dyn.integer("eigen_check_stride", 512));
  c.evolve.periodic_warm_start = dyn.boolean("periodic_warm_start", false);
  c.evolve.steps_per_rf_period = dyn.number("steps_per_rf_period", c.evolve.steps_per_rf_period);
  if (!(c.evolve.steps_per_rf_period > 0.0))
    dyn.fail("steps_per_rf_period", "steps_per_rf_period must be positive");
  if (!(c.evolve.window > 0.0) || c.evolve.transient < 0.0)
    dyn.fail("window_us", "window must be positive and transient non-negative");

  const Reader sw = root.section("sweep");
  c.sweep.prescan_points = sw.integer("prescan_points", c.sweep.prescan_points);
  c.sweep.fine_points = sw.integer("fine_points", c.sweep.fine_points);
  c.sweep.fine_halfwidth_fwhm = sw.number("fine_halfwidth_fwhm", c.sweep.fine_halfwidth_fwhm);
  c.sweep.dip = sw.guard("dip", [&] { return dip_selector_from_string(sw.string("dip", to_string(c.sweep.dip))); });
  c.sweep.prescan_halfwidth = mhz(sw.number("prescan_halfwidth_mhz", 0.0));

  const Reader bg = root.section("background");
  c.background.level = bg.number("level", 0.0);
  c.background.poisson_scale = bg.number("poisson_scale", 0.0);
  c.background.seed = static_cast<std::uint64_t>(bg.integer("seed", 1));
  return c;
}

void dephasing_from(const nlohmann::json &atom, PhysicalConfig &c, const Reader &r) {
  if (!atom.is_object() || !atom.contains("dephasing")) return;
  const auto &arr = atom.at("dephasing");
  if (!arr.is_array()) r.fail("dephasing", "'atom.dephasing' must be a list");
  c.dephasings.channels.clear();
  for (const auto &e : arr) {
    if (!e.is_object()) r.fail("dephasing", "dephasing entries must be objects");
    const Reader er(e, "atom.dephasing", nullptr);
    const Manifold a = manifold_from(r, "dephasing", er.string("a", "S12"));
    const Manifold b = manifold_from(r, "dephasing", er.string("b", "D32"));
    const double rate = khz(er.number("rate_khz", 0.0));
    if (rate < 0.0) r.fail("dephasing", "dephasing rates must be non-negative");
    c.dephasings.channels.push_back({a, b, rate});
  }
}

// Unit conversions leave last-digit noise (29.999999999999996 us); rounding
// every float to 12 significant digits makes the exported document a fixed
// point of parse -> export, so fingerprints survive a round trip.
void tidy_numbers(nlohmann::ordered_json &j) {
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (x != 0.0 && std::isfinite(x)) {
      const double scale = std::pow(10.0, 11 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
      j = std::round(x * scale) / scale;
    }
  } else if (j.is_structured()) {
    for (auto &e : j) tidy_numbers(e);
  }
}

} // namespace

ScanSettings::ScanSettings() {
  for (double r : arange(5.0, 40.0, 2.5)) radii.push_back(um(r));
  for (double a : arange(0.0, 345.0, 15.0)) angles.push_back(deg(a));
}

FitSettings::FitSettings() {
  velocities = arange(50.0, 300.0, 10.0);
  probe_evolve.transient = 5e-6;
  probe_evolve.window = 5e-6;
}

AnalyticSettings::AnalyticSettings() {
  betas = arange(0.0, 1.25, 0.05);
  params = params.with_gamma_tilde(gamma_tilde);
}

PhysicalConfig physical_config_from_json(const nlohmann::json &j) {
  const Reader root(j, "", nullptr);
  PhysicalConfig c = physical_from(root, false);
  if (j.contains("atom")) dephasing_from(j.at("atom"), c, root.section("atom"));
  return c;
}

RunConfig parse_run_config(const std::string &text, const std::string &base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error &e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n')) + 1;
    throw ConfigError(std::string("malformed JSON: ") + e.what(), "", line);
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  // Result sidecars carry the run config under "config" and can be rerun directly.
  if (!j.contains("atom") && j.contains("config") && j.at("config").is_object()) j = nlohmann::json(j.at("config"));
  const Reader root(j, "", &text);

  RunConfig rc;
  rc.base_dir = base_dir;
  rc.physical = physical_from(root, true);
  dephasing_from(j.at("atom"), rc.physical, root.section("atom"));
  try {
    (void)rc.physical.structure();
  } catch (const ValidationError &e) {
    throw ConfigError(std::string("atom: ") + e.what(), "atom", 0);
  }

  const Reader sp = root.section("spectrum");
  if (auto cen = sp.optional_number("center_mhz")) rc.spectrum.center = mhz(*cen);
  rc.spectrum.halfwidth = mhz(sp.number("halfwidth_mhz", to_mhz(rc.spectrum.halfwidth)));
  rc.spectrum.points = sp.integer("points", rc.spectrum.points);
  if (rc.spectrum.points < 1) sp.fail("points", "spectrum needs at least one point");

  const Reader sc = root.section("scan");
  if (sc.has("radii_um")) {
    rc.scan.radii.clear();
    for (double r : sc.numbers("radii_um", {})) rc.scan.radii.push_back(um(r));
  }
  const std::string mode = sc.string("mode", "counter");
  if (mode == "co") rc.scan.mode = RotationMode::CoRotating;
  else if (mode == "counter") rc.scan.mode = RotationMode::CounterRotating;
  else sc.fail("mode", "scan mode must be 'co' or 'counter'");
  rc.scan.equal_rabi = sc.boolean("equal_rabi", rc.scan.equal_rabi);
  if (sc.has("angles_deg")) {
    rc.scan.angles.clear();
    for (double a : sc.numbers("angles_deg", {})) rc.scan.angles.push_back(deg(a));
  }
  rc.scan.angular_radius = um(sc.number("angular_radius_um", rc.scan.angular_radius * 1e6));
  const auto waists = sc.numbers("waists_um", {rc.scan.waist_a * 1e6, rc.scan.waist_b * 1e6});
  if (waists.size() != 2) sc.fail("waists_um", "waists_um needs two entries");
  rc.scan.waist_a = um(waists[0]);
  rc.scan.waist_b = um(waists[1]);

  const Reader fit = root.section("fit");
  rc.fit.dataset = fit.string("dataset", "");
  rc.fit.bessel.l = fit.integer("l", rc.physical.ir1.beam.l() != 0 ? rc.physical.ir1.beam.l() : 2);
  rc.fit.bessel.rf = rc.physical.micromotion.rf;
  if (fit.has("fixed_b")) rc.fit.bessel.fixed_b = fit.optional_number("fixed_b");
  if (fit.has("velocities_m_s")) rc.fit.velocities = fit.numbers("velocities_m_s", {});
  rc.fit.percentile = fit.number("percentile", rc.fit.percentile);
  if (!(rc.fit.percentile > 0.0 && rc.fit.percentile < 1.0)) fit.fail("percentile", "percentile must lie in (0, 1)");
  rc.fit.model = fit.string("model", rc.fit.model);
  if (rc.fit.model != "bessel" && rc.fit.model != "full") fit.fail("model", "fit model must be 'bessel' or 'full'");
  const Reader seed = fit.section("seed");
  rc.fit.seed.rabi_uv = mhz(seed.number("rabi_uv_mhz", to_mhz(rc.physical.uv.rabi)));
  rc.fit.seed.rabi_ir1 = mhz(seed.number("rabi_ir1_mhz", to_mhz(rc.physical.ir1.rabi)));
  rc.fit.seed.rabi_ir2 = mhz(seed.number("rabi_ir2_mhz", to_mhz(rc.physical.ir2.rabi)));
  rc.fit.seed.dephasing = khz(seed.number("dephasing_khz", 0.0));
  rc.fit.seed.velocity = seed.number("velocity_m_s", rc.physical.micromotion.velocity);
  if (fit.has("free")) {
    rc.fit.free.clear();
    const auto &arr = j.at("fit").at("free");
    if (!arr.is_array()) fit.fail("free", "'fit.free' must be a list of parameter names");
    for (const auto &e : arr) {
      const std::string name = e.is_string() ? e.get<std::string>() : "";
      bool ok = false;
      for (auto p : {FullParam::RabiUV, FullParam::RabiIR1, FullParam::RabiIR2, FullParam::Dephasing,
                     FullParam::Velocity})
        if (to_string(p) == name) {
          rc.fit.free.push_back(p);
          ok = true;
        }
      if (!ok) fit.fail("free", "unknown free parameter '" + name + "'");
    }
  }
  const Reader probe = fit.section("probe");
  rc.fit.probe_evolve = rc.physical.evolve;
  rc.fit.probe_evolve.transient = probe.number("transient_us", 5.0) * 1e-6;
  rc.fit.probe_evolve.window = probe.number("window_us", 5.0) * 1e-6;
  rc.fit.max_evaluations = static_cast<std::size_t>(fit.integer("max_evaluations", 200));
  rc.fit.cache = fit.string("cache", "");
  const auto rb = fit.numbers("rabi_bounds_mhz", {1.0, 20.0});
  const auto db = fit.numbers("dephasing_bounds_khz", {0.0, 100.0});
  const auto vb = fit.numbers("velocity_bounds_m_s", {0.0, 500.0});
  const auto pb = fit.numbers("plausible_rabi_mhz", {7.0, 9.0});
  for (const auto *b : {&rb, &db, &vb, &pb})
    if (b->size() != 2 || !((*b)[0] < (*b)[1])) fit.fail("bounds", "bounds need two increasing entries");
  rc.fit.rabi_bound = {mhz(rb[0]), mhz(rb[1])};
  rc.fit.dephasing_bound = {khz(db[0]), khz(db[1])};
  rc.fit.velocity_bound = {vb[0], vb[1]};
  rc.fit.bessel.velocity_bound = rc.fit.velocity_bound;
  rc.fit.plausible_rabi = {mhz(pb[0]), mhz(pb[1])};

  const Reader an = root.section("analytic");
  auto &p = rc.analytic.params;
  p.rabi = mhz(an.number("rabi_mhz", to_mhz(p.rabi)));
  p.gamma = mhz(an.number("gamma_mhz", to_mhz(p.gamma)));
  p.decay = mhz(an.number("decay_mhz", to_mhz(p.decay)));
  p.detuning = mhz(an.number("detuning_mhz", to_mhz(p.detuning)));
  p.rf = mhz(an.number("rf_mhz", to_mhz(rc.physical.micromotion.rf)));
  rc.analytic.gamma_tilde = an.number("gamma_tilde", rc.analytic.gamma_tilde);
  an.guard("rabi_mhz", [&] { return p.validate(), 0; });
  p = p.with_gamma_tilde(rc.analytic.gamma_tilde);
  if (an.has("betas")) rc.analytic.betas = an.numbers("betas", {});
  rc.analytic.fixed_b = an.optional_number("fixed_b");

  rc.seed = static_cast<std::uint64_t>(root.integer("seed", 1));
  return rc;
}

RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_run_config(ss.str(), dir.empty() ? "." : dir);
}

nlohmann::ordered_json to_json(const PhysicalConfig &c) {
  nlohmann::ordered_json j;
  auto &atom = j["atom"];
  atom["field_gauss"] = c.field_gauss;
  atom["g_s"] = c.g.s;
  atom["g_d"] = c.g.d;
  atom["g_p"] = c.g.p;
  atom["gamma_ps_mhz"] = to_mhz(c.decay.p_to_s);
  atom["gamma_pd_mhz"] = to_mhz(c.decay.p_to_d);
  atom["dephasing"] = nlohmann::ordered_json::array();
  for (const auto &ch : c.dephasings.channels)
    atom["dephasing"].push_back({{"a", to_string(ch.a)}, {"b", to_string(ch.b)}, {"rate_khz", ch.rate / khz(1.0)}});
  atom["depolarizing_khz"] = c.dephasings.depolarizing / khz(1.0);

  auto &beams = j["beams"];
  beams["uv"] = {{"wavelength_nm", c.uv.beam.wavelength() * 1e9},
                 {"direction", {c.uv_direction[0], c.uv_direction[1], c.uv_direction[2]}}};
  beams["ir1"] = beam_json(c.ir1.beam);
  beams["ir2"] = beam_json(c.ir2.beam);

  auto &drives = j["drives"];
  drives["uv"] = drive_json(c.uv);
  drives["ir1"] = drive_json(c.ir1);
  drives["ir2"] = drive_json(c.ir2);
  drives["equal_rabi"] = c.equal_rabi;

  j["micromotion"] = {{"velocity_m_s", c.micromotion.velocity},
                      {"direction_deg", to_deg(c.micromotion.direction)},
                      {"rf_mhz", to_mhz(c.micromotion.rf)},
                      {"phase_deg", to_deg(c.micromotion.phase)}};
  j["ion"] = {{"position_um", {c.ion_position[0] * 1e6, c.ion_position[1] * 1e6, c.ion_position[2] * 1e6}},
              {"r_min_um", c.r_min * 1e6}};
  j["dynamics"] = {{"transient_us", c.evolve.transient * 1e6},
                   {"window_us", c.evolve.window * 1e6},
                   {"rtol", c.evolve.rtol},
                   {"atol", c.evolve.atol},
                   {"snap_window", c.evolve.snap_window},
                   {"eigen_check_stride", c.evolve.eigen_check_stride},
                   {"periodic_warm_start", c.evolve.periodic_warm_start},
                   {"steps_per_rf_period", c.evolve.steps_per_rf_period}};
  j["sweep"] = {{"prescan_points", c.sweep.prescan_points},
                {"fine_points", c.sweep.fine_points},
                {"fine_halfwidth_fwhm", c.sweep.fine_halfwidth_fwhm},
                {"dip", to_string(c.sweep.dip)},
                {"prescan_halfwidth_mhz", to_mhz(c.sweep.prescan_halfwidth)}};
  j["background"] = {{"level", c.background.level},
                     {"poisson_scale", c.background.poisson_scale},
                     {"seed", c.background.seed}};
  tidy_numbers(j);
  return j;
}

nlohmann::ordered_json to_json(const RunConfig &c) {
  nlohmann::ordered_json j = to_json(c.physical);
  j["spectrum"] = {{"center_mhz", c.spectrum.center ? nlohmann::ordered_json(to_mhz(*c.spectrum.center))
                                                    : nlohmann::ordered_json(nullptr)},
                   {"halfwidth_mhz", to_mhz(c.spectrum.halfwidth)},
                   {"points", c.spectrum.points}};
  std::vector<double> radii, angles;
  for (double r : c.scan.radii) radii.push_back(r * 1e6);
  for (double a : c.scan.angles) angles.push_back(to_deg(a));
  j["scan"] = {{"radii_um", radii},
               {"mode", to_string_mode(c.scan.mode)},
               {"equal_rabi", c.scan.equal_rabi},
               {"angles_deg", angles},
               {"angular_radius_um", c.scan.angular_radius * 1e6},
               {"waists_um", {c.scan.waist_a * 1e6, c.scan.waist_b * 1e6}}};
  std::vector<std::string> free;
  for (auto p : c.fit.free) free.push_back(to_string(p));
  j["fit"] = {{"dataset", c.fit.dataset},
              {"l", c.fit.bessel.l},
              {"fixed_b", c.fit.bessel.fixed_b ? nlohmann::ordered_json(*c.fit.bessel.fixed_b)
                                               : nlohmann::ordered_json(nullptr)},
              {"velocities_m_s", c.fit.velocities},
              {"percentile", c.fit.percentile},
              {"model", c.fit.model},
              {"seed",
               {{"rabi_uv_mhz", to_mhz(c.fit.seed.rabi_uv)},
                {"rabi_ir1_mhz", to_mhz(c.fit.seed.rabi_ir1)},
                {"rabi_ir2_mhz", to_mhz(c.fit.seed.rabi_ir2)},
                {"dephasing_khz", c.fit.seed.dephasing / khz(1.0)},
                {"velocity_m_s", c.fit.seed.velocity}}},
              {"free", free},
              {"probe", {{"transient_us", c.fit.probe_evolve.transient * 1e6},
                         {"window_us", c.fit.probe_evolve.window * 1e6}}},
              {"max_evaluations", c.fit.max_evaluations},
              {"cache", c.fit.cache},
              {"rabi_bounds_mhz", {to_mhz(c.fit.rabi_bound.lo), to_mhz(c.fit.rabi_bound.hi)}},
              {"dephasing_bounds_khz", {c.fit.dephasing_bound.lo / khz(1.0), c.fit.dephasing_bound.hi / khz(1.0)}},
              {"velocity_bounds_m_s", {c.fit.velocity_bound.lo, c.fit.velocity_bound.hi}},
              {"plausible_rabi_mhz", {to_mhz(c.fit.plausible_rabi.lo), to_mhz(c.fit.plausible_rabi.hi)}}};
  const auto &p = c.analytic.params;
  j["analytic"] = {{"rabi_mhz", to_mhz(p.rabi)},
                   {"gamma_mhz", to_mhz(p.gamma)},
                   {"decay_mhz", to_mhz(p.decay)},
                   {"detuning_mhz", to_mhz(p.detuning)},
                   {"rf_mhz", to_mhz(p.rf)},
                   {"gamma_tilde", c.analytic.gamma_tilde},
                   {"betas", c.analytic.betas},
                   {"fixed_b", c.analytic.fixed_b ? nlohmann::ordered_json(*c.analytic.fixed_b)
                                                  : nlohmann::ordered_json(nullptr)}};
  j["seed"] = c.seed;
  tidy_numbers(j);
  return j;
}

} // namespace rotdop
