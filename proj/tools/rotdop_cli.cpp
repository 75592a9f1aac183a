// rotdop: command-line front end for spectra, scans, fits and the analytic model.
//
//   rotdop <command> <config.json> [--output-dir DIR] [--format csv|json|both]
//          [--jobs N] [--seed S]
//
// Exit codes: 0 success, 1 usage, 2 config error, 3 simulation failure,
// 130 interrupted (completed points are still written).

#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "rotdop/analytic.hpp"
#include "rotdop/config.hpp"
#include "rotdop/fitkit.hpp"
#include "rotdop/output.hpp"
#include "rotdop/parallel.hpp"
#include "rotdop/spectra.hpp"

using namespace rotdop;
using json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string config;
  std::string output_dir;
  std::string format = "csv";
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string dataset; // fit commands only
  std::string model;   // interval-scan only
};

struct Context {
  RunConfig rc;
  OutputFormat format;
  std::string dir;
  unsigned jobs;
  std::string command;

  json meta(const std::string &status) const {
    json j;
    j["command"] = command;
    j["fingerprint"] = fingerprint(to_json(rc));
    j["status"] = status;
    j["config"] = to_json(rc);
    return j;
  }

  void emit(const std::string &stem, const CsvTable &t, json m) const {
    for (const auto &p : write_result(dir, stem, format, t, m)) std::cout << p << "\n";
  }
};

extern "C" void on_sigint(int) { cancel_flag().store(true); }

std::string status() { return cancel_flag().load() ? "interrupted" : "complete"; }

int finish() { return cancel_flag().load() ? 130 : 0; }

int cmd_spectrum(const Context &ctx) {
  const auto &c = ctx.rc.physical;
  const auto &sp = ctx.rc.spectrum;
  const double center = sp.center.value_or(c.ir2.detuning);
  std::vector<double> grid;
  for (int i = 0; i < sp.points; ++i)
    grid.push_back(sp.points == 1 ? center
                                  : center - sp.halfwidth + 2.0 * sp.halfwidth * i / (sp.points - 1));
  const auto s = sweep_spectrum(c, grid, ctx.jobs, true);
  json m = ctx.meta(status());
  json dips = json::array();
  for (const auto &d : dark_resonance_positions(c.structure(), c.uv.detuning, c.ir2.detuning))
    dips.push_back({{"kind", to_string(d.kind)}, {"center_mhz", to_mhz(d.center)}, {"pairs", d.pairs.size()}});
  m["dark_resonances"] = dips;
  ctx.emit("spectrum", spectrum_table(s), m);
  return finish();
}

json scan_summary(const ScanResult &s) {
  std::size_t valid = 0;
  for (const auto &p : s.points) valid += p.valid;
  return {{"kind", s.kind}, {"points", s.points.size()}, {"valid", valid}};
}

int cmd_radial(const Context &ctx) {
  const auto &sc = ctx.rc.scan;
  const auto s = radial_scan(ctx.rc.physical, sc.radii, sc.mode, sc.equal_rabi, ctx.jobs);
  json m = ctx.meta(status());
  m["summary"] = scan_summary(s);
  ctx.emit("radial_scan", scan_table(s), m);
  return finish();
}

int cmd_angular(const Context &ctx) {
  const auto &sc = ctx.rc.scan;
  const auto s = angular_scan(ctx.rc.physical, sc.angles, sc.angular_radius, ctx.jobs);
  json m = ctx.meta(status());
  m["summary"] = scan_summary(s);
  std::vector<double> phis, depths;
  for (const auto &p : s.points)
    if (p.valid) {
      phis.push_back(p.abscissa);
      depths.push_back(p.fit.depth);
    }
  if (phis.size() >= 3) {
    const auto f = fit_sinusoid(phis, depths, 2);
    m["sinusoid"] = {{"offset", f.offset},
                     {"amplitude", f.amplitude},
                     {"maxima_deg", {to_deg(f.phase), to_deg(f.phase) + 180.0}},
                     {"rms_residual", f.rms_residual}};
  }
  ctx.emit("angular_scan", scan_table(s), m);
  return finish();
}

int cmd_waist(const Context &ctx) {
  const auto &sc = ctx.rc.scan;
  const auto [a, b] = waist_comparison(ctx.rc.physical, sc.radii, sc.waist_a, sc.waist_b, sc.mode, ctx.jobs);
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t i = 0; i < a.points.size() && i < b.points.size(); ++i) {
    if (!a.points[i].valid || !b.points[i].valid) continue;
    const double da = a.points[i].fit.depth, db = b.points[i].fit.depth;
    worst = std::max(worst, std::abs(da - db) / std::max(0.5 * (da + db), 1e-300));
    ++compared;
  }
  json ma = ctx.meta(status());
  ma["waist_um"] = sc.waist_a * 1e6;
  ctx.emit("waist_a", scan_table(a), ma);
  json mb = ctx.meta(status());
  mb["waist_um"] = sc.waist_b * 1e6;
  ctx.emit("waist_b", scan_table(b), mb);
  json summary = ctx.meta(status());
  summary["waists_um"] = {sc.waist_a * 1e6, sc.waist_b * 1e6};
  summary["compared_points"] = compared;
  summary["max_relative_depth_discrepancy"] = worst;
  const auto path = (std::filesystem::path(ctx.dir) / "waist_summary.json").string();
  write_text_atomic(path, summary.dump(2) + "\n");
  std::cout << path << "\n";
  return finish();
}

DepthDataset load_dataset(const Context &ctx) {
  if (ctx.rc.fit.dataset.empty()) throw ConfigError("no dataset given (fit.dataset or --dataset)", "fit.dataset");
  try {
    auto d = load_depth_dataset(ctx.rc.fit.dataset);
    d.validate(ctx.rc.physical.r_min);
    return d;
  } catch (const ValidationError &e) {
    throw ConfigError(std::string("dataset: ") + e.what(), "fit.dataset");
  } catch (const std::runtime_error &e) {
    throw ConfigError(std::string("dataset: ") + e.what(), "fit.dataset");
  }
}

CsvTable model_table(const DepthDataset &d, const std::function<std::vector<double>()> &model) {
  const auto m = model();
  CsvTable t{{"r_um", "depth", "sigma", "model", "pull"}, {}};
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    const auto &p = d.points[i];
    t.add({format_number(p.r * 1e6), format_number(p.depth), format_number(p.sigma), format_number(m[i]),
           format_number((p.depth - m[i]) / p.sigma)});
  }
  return t;
}

int cmd_fit_bessel(const Context &ctx) {
  const auto d = load_dataset(ctx);
  const auto &opt = ctx.rc.fit.bessel;
  const auto f = fit_bessel_depth(d, opt);
  json m = ctx.meta(status());
  m["fit"] = to_json(f);
  const double b = opt.fixed_b ? *opt.fixed_b : f.value("b");
  ctx.emit("fit_bessel", model_table(d, [&] {
             std::vector<double> out;
             for (const auto &p : d.points)
               out.push_back(bessel_depth_model(p.r, f.value("a"), b, f.value("velocity"), opt.l, opt.rf));
             return out;
           }),
           m);
  return finish();
}

FullDepthModel make_full_model(const Context &ctx, std::vector<FullParam> free) {
  const auto &fs = ctx.rc.fit;
  FullModelOptions o;
  o.base = ctx.rc.physical;
  o.mode = ctx.rc.scan.mode;
  o.free = std::move(free);
  o.probe_evolve = fs.probe_evolve;
  o.rabi_bound = fs.rabi_bound;
  o.dephasing_bound = fs.dephasing_bound;
  o.velocity_bound = fs.velocity_bound;
  o.max_evaluations = fs.max_evaluations;
  o.jobs = ctx.jobs;
  if (!fs.cache.empty()) o.cache_path = (std::filesystem::path(ctx.dir) / fs.cache).string();
  if (!o.cache_path.empty()) std::filesystem::create_directories(ctx.dir);
  auto cache = std::make_shared<DepthCache>(o.cache_path);
  return FullDepthModel(o, cache);
}

int cmd_fit_full(const Context &ctx) {
  const auto d = load_dataset(ctx);
  const auto model = make_full_model(ctx, ctx.rc.fit.free);
  const auto f = fit_full_model(d, model, ctx.rc.fit.seed);
  json m = ctx.meta(status());
  m["fit"] = to_json(f);
  FullParams best = ctx.rc.fit.seed;
  for (auto p : ctx.rc.fit.free) best.set(p, f.value(to_string(p)));
  std::vector<double> radii;
  for (const auto &p : d.points) radii.push_back(p.r);
  ctx.emit("fit_full", model_table(d, [&] { return model.depths(best, radii); }), m);
  return finish();
}

json interval_json(const IntervalScan &s) {
  auto opt = [](const std::optional<double> &v) { return v ? json(*v) : json(nullptr); };
  return {{"nu", s.nu}, {"threshold", s.threshold}, {"lower_m_s", opt(s.lower)}, {"upper_m_s", opt(s.upper)}};
}

int cmd_interval(const Context &ctx, const std::string &model_override) {
  const auto d = load_dataset(ctx);
  const auto &fs = ctx.rc.fit;
  const std::string model = model_override.empty() ? fs.model : model_override;
  IntervalScan s;
  if (model == "bessel") {
    s = bessel_interval_scan(d, fs.velocities, fs.bessel, fs.percentile);
  } else if (model == "full") {
    const auto m = make_full_model(ctx, fs.free);
    const Bound band = fs.plausible_rabi;
    auto plausible = [band](const FitResult &f) {
      for (std::size_t i = 0; i < f.names.size(); ++i)
        if (f.names[i].rfind("rabi_ir", 0) == 0 && (f.values[i] < band.lo || f.values[i] > band.hi)) return false;
      return true;
    };
    s = full_interval_scan(d, m, fs.velocities, fs.seed, fs.percentile, plausible);
  } else {
    throw ConfigError("unknown interval model '" + model + "'", "fit.model");
  }
  json m = ctx.meta(status());
  m["model"] = model;
  m["interval"] = interval_json(s);
  ctx.emit("interval_scan", interval_table(s), m);
  return finish();
}

int cmd_analytic(const Context &ctx) {
  const auto &an = ctx.rc.analytic;
  std::vector<double> calib;
  for (double b : an.betas)
    if (b <= 1.25) calib.push_back(b);
  const auto approx = calibrate_bessel_approx(an.params, calib, an.fixed_b.value_or(0.0));
  CsvTable t{{"beta", "d_model1", "d_bessel"}, {}};
  for (double b : an.betas)
    t.add({format_number(b), format_number(depth_model1(an.params, b)),
           format_number(depth_bessel_approx(approx, b))});
  json m = ctx.meta(status());
  m["bessel_approx"] = {{"a", approx.a}, {"b", approx.b}, {"beta_max", approx.beta_max},
                        {"max_residual", approx.max_residual}};
  ctx.emit("analytic_depth", t, m);
  return finish();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Rotational Doppler dark-resonance simulator"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App *sub) {
    sub->add_option("config", o.config, "JSON run configuration (or a result sidecar)")->required();
    sub->add_option("--output-dir,-o", o.output_dir, "output directory (default $ROTDOP_OUTPUT_DIR or ./out)");
    sub->add_option("--format", o.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    sub->add_option("--jobs,-j", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "seed for background noise");
  };
  struct Cmd {
    const char *name;
    const char *help;
  };
  const Cmd cmds[] = {{"spectrum", "fluorescence versus IR1 detuning"},
                      {"radial-scan", "dip depth versus ion-beam distance"},
                      {"angular-scan", "dip depth versus ion azimuth"},
                      {"waist-compare", "radial scans at two beam waists"},
                      {"fit-bessel", "J0^2 depth fit of a dataset"},
                      {"fit-full", "8-level model fit of a dataset"},
                      {"interval-scan", "chi^2 velocity interval"},
                      {"analytic-depth", "three-level depth model table"}};
  std::map<std::string, CLI::App *> subs;
  for (const auto &c : cmds) {
    auto *sub = app.add_subcommand(c.name, c.help);
    common(sub);
    subs[c.name] = sub;
  }
  for (const char *n : {"fit-bessel", "fit-full", "interval-scan"})
    subs[n]->add_option("--dataset", o.dataset, "CSV dataset (r_um,depth,sigma), overrides fit.dataset");
  subs["interval-scan"]->add_option("--model", o.model, "bessel or full")->check(CLI::IsMember({"bessel", "full"}));

  CLI11_PARSE(app, argc, argv);
  std::string command;
  for (const auto &[name, sub] : subs)
    if (sub->parsed()) command = name;

  Context ctx;
  ctx.command = command;
  ctx.jobs = o.jobs;
  ctx.format = output_format_from_string(o.format);
  ctx.dir = resolve_output_dir(o.output_dir);
  try {
    ctx.rc = load_run_config(o.config);
    if (o.seed) {
      ctx.rc.seed = *o.seed;
      ctx.rc.physical.background.seed = *o.seed;
    }
    if (!o.dataset.empty()) ctx.rc.fit.dataset = o.dataset;
    else if (!ctx.rc.fit.dataset.empty() && std::filesystem::path(ctx.rc.fit.dataset).is_relative())
      ctx.rc.fit.dataset = (std::filesystem::path(ctx.rc.base_dir) / ctx.rc.fit.dataset).string();
    if (!ctx.rc.fit.dataset.empty())
      ctx.rc.fit.dataset = std::filesystem::weakly_canonical(ctx.rc.fit.dataset).string();
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << o.config;
    if (e.line) std::cerr << ":" << e.line;
    std::cerr << ": " << e.what() << "\n";
    return 2;
  }

  std::signal(SIGINT, on_sigint);
  try {
    if (command == "spectrum") return cmd_spectrum(ctx);
    if (command == "radial-scan") return cmd_radial(ctx);
    if (command == "angular-scan") return cmd_angular(ctx);
    if (command == "waist-compare") return cmd_waist(ctx);
    if (command == "fit-bessel") return cmd_fit_bessel(ctx);
    if (command == "fit-full") return cmd_fit_full(ctx);
    if (command == "interval-scan") return cmd_interval(ctx, o.model);
    if (command == "analytic-depth") return cmd_analytic(ctx);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Cancelled &) {
    std::cerr << "interrupted\n";
    return 130;
  } catch (const std::exception &e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
