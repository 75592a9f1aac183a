#include "rotdop/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>

#include "rotdop/ode.hpp"

namespace rotdop {

std::string to_string(DriveLabel l) {
  switch (l) {
  case DriveLabel::UV: return "UV";
  case DriveLabel::IR1: return "IR1";
  case DriveLabel::IR2: return "IR2";
  }
  return "?";
}

DriveClock DriveClock::from_drives(const std::vector<LaserDrive> &drives, double rf) {
  const auto d = order_drives(drives);
  return DriveClock{rf, d[2]->detuning - d[1]->detuning};
}

DensityState DensityState::pure(std::size_t level) {
  if (level >= kNumLevels) throw ValidationError("level index out of range");
  DensityState s;
  s.rho(static_cast<Eigen::Index>(level), static_cast<Eigen::Index>(level)) = 1.0;
  return s;
}

Populations DensityState::populations() const {
  Populations p{};
  for (std::size_t i = 0; i < kNumLevels; ++i)
    p[i] = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
  return p;
}

namespace {

double hermiticity_error(const Mat8 &rho) {
  double m = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = i; j < 8; ++j) m = std::max(m, std::abs(rho(i, j) - std::conj(rho(j, i))));
  return m;
}

double trace_error(const Mat8 &rho) { return std::abs(rho.trace() - Complex(1.0, 0.0)); }

double min_eigenvalue(const Mat8 &rho) {
  const Mat8 h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat8> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

} // namespace

InvariantReport DensityState::check(bool with_eigenvalues) const {
  InvariantReport r;
  r.trace_error = trace_error(rho);
  r.hermiticity_error = hermiticity_error(rho);
  r.min_eigenvalue = with_eigenvalues ? min_eigenvalue(rho) : 0.0;
  return r;
}

std::array<const LaserDrive *, 3> order_drives(const std::vector<LaserDrive> &drives) {
  std::array<const LaserDrive *, 3> out{nullptr, nullptr, nullptr};
  for (const auto &d : drives) {
    auto &slot = out[static_cast<std::size_t>(d.label)];
    if (slot) throw ValidationError("duplicate drive label " + to_string(d.label));
    if (!(d.rabi >= 0.0) || !std::isfinite(d.rabi))
      throw ValidationError("Rabi frequency must be finite and non-negative");
    if (!std::isfinite(d.fm_amplitude) || !std::isfinite(d.detuning))
      throw ValidationError("drive detuning and FM amplitude must be finite");
    slot = &d;
  }
  for (std::size_t i = 0; i < 3; ++i)
    if (!out[i]) throw ValidationError("missing drive " + to_string(static_cast<DriveLabel>(i)));
  if (out[0]->polarization != Polarization::SigmaPlusMinus)
    throw ValidationError("UV drive must be sigma+- polarized");
  return out;
}

namespace {

// Precomputed pieces of the generator; evaluating H_eff(t) only touches the
// modulated diagonals and the IR1 couplings.
class MasterEquation {
public:
  MasterEquation(const LevelStructure &s, const std::vector<LaserDrive> &drives,
                 const DriveClock &clock, const Dissipator *dissipator)
      : clock_(clock) {
    if (!(clock.rf > 0.0)) throw ValidationError("RF drive frequency must be positive");
    const auto d = order_drives(drives);
    uv_fm_ = d[0]->fm_amplitude;
    ir2_fm_ = d[2]->fm_amplitude;
    rel_index_ = (d[1]->fm_amplitude - d[2]->fm_amplitude) / clock.rf;
    fm_phase_ = d[1]->fm_phase;
    beat_ = d[1]->detuning - d[2]->detuning;
    fm_present_ = d[0]->fm_amplitude != 0.0 || d[1]->fm_amplitude != 0.0 ||
                  d[2]->fm_amplitude != 0.0;
    if (d[0]->fm_phase != d[1]->fm_phase || d[1]->fm_phase != d[2]->fm_phase)
      throw ValidationError("all drives must share one micromotion phase");

    base_.setZero();
    for (std::size_t i = 0; i < kNumLevels; ++i) {
      const auto &lv = s.levels[i];
      double e = lv.energy;
      if (lv.manifold == Manifold::S12) e += d[0]->detuning;
      if (lv.manifold == Manifold::D32) e += d[2]->detuning;
      base_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = e;
      is_s_[i] = lv.manifold == Manifold::S12;
      is_d_[i] = lv.manifold == Manifold::D32;
    }
    auto add = [&](const LaserDrive &drv, Transition t) {
      for (const auto &c : coupling_amplitudes(s, t, drv.polarization)) {
        const double v = 0.5 * drv.rabi * c.amplitude;
        base_(static_cast<Eigen::Index>(c.upper), static_cast<Eigen::Index>(c.lower)) += v;
        base_(static_cast<Eigen::Index>(c.lower), static_cast<Eigen::Index>(c.upper)) += v;
      }
    };
    add(*d[0], Transition::SP);
    add(*d[2], Transition::DP);
    for (const auto &c : coupling_amplitudes(s, Transition::DP, d[1]->polarization))
      ir1_.push_back({c.upper, c.lower, 0.5 * d[1]->rabi * c.amplitude});

    if (dissipator) {
      loss_ = dissipator->loss_matrix();
      for (const auto &op : dissipator->jumps)
        for (const auto &a : op.entries)
          for (const auto &b : op.entries)
            sandwich_.push_back({a.row, b.row, a.col, b.col, op.rate * a.amp * std::conj(b.amp)});
    } else {
      loss_.setZero();
    }
  }

  bool fm_present() const { return fm_present_; }

  /// H(t) without dissipation.
  Mat8 hamiltonian(double t) const {
    Mat8 h = base_;
    apply_time_dependence(h, t);
    return h;
  }

  void rhs(double t, const Eigen::Map<const Mat8> &rho, Eigen::Map<Mat8> &out) const {
    Mat8 heff = base_;
    apply_time_dependence(heff, t);
    heff -= Complex(0.0, 1.0) * loss_;
    const Mat8 x = heff * rho;
    out.noalias() = Complex(0.0, -1.0) * (x - x.adjoint());
    for (const auto &s : sandwich_)
      out(static_cast<Eigen::Index>(s.i), static_cast<Eigen::Index>(s.j)) +=
          s.coef * rho(static_cast<Eigen::Index>(s.k), static_cast<Eigen::Index>(s.l));
  }

private:
  void apply_time_dependence(Mat8 &h, double t) const {
    const double arg = clock_.rf * t + fm_phase_;
    if (fm_present_) {
      const double c = std::cos(arg);
      for (int i = 0; i < 8; ++i) {
        if (is_s_[static_cast<std::size_t>(i)]) h(i, i) += uv_fm_ * c;
        if (is_d_[static_cast<std::size_t>(i)]) h(i, i) += ir2_fm_ * c;
      }
    }
    const double theta = beat_ * t + (fm_present_ ? rel_index_ * std::sin(arg) : 0.0);
    const Complex ph(std::cos(theta), -std::sin(theta));
    for (const auto &c : ir1_) {
      h(static_cast<Eigen::Index>(c.upper), static_cast<Eigen::Index>(c.lower)) += c.value * ph;
      h(static_cast<Eigen::Index>(c.lower), static_cast<Eigen::Index>(c.upper)) +=
          c.value * std::conj(ph);
    }
  }

  struct Ir1Term {
    std::size_t upper;
    std::size_t lower;
    double value;
  };
  struct Sandwich {
    std::size_t i, j, k, l;
    Complex coef;
  };

  DriveClock clock_;
  Mat8 base_;
  Mat8 loss_;
  std::array<bool, kNumLevels> is_s_{};
  std::array<bool, kNumLevels> is_d_{};
  std::vector<Ir1Term> ir1_;
  std::vector<Sandwich> sandwich_;
  double uv_fm_ = 0.0;
  double ir2_fm_ = 0.0;
  double rel_index_ = 0.0;
  double fm_phase_ = 0.0;
  double beat_ = 0.0;
  bool fm_present_ = false;
};

} // namespace

Mat8 build_hamiltonian(const LevelStructure &s, const std::vector<LaserDrive> &drives,
                       const DriveClock &clock, double t) {
  return MasterEquation(s, drives, clock, nullptr).hamiltonian(t);
}

Mat8 Dissipator::apply(const Mat8 &rho) const {
  Mat8 out = Mat8::Zero();
  for (const auto &op : jumps) {
    Mat8 l = Mat8::Zero();
    for (const auto &e : op.entries)
      l(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) += e.amp;
    const Mat8 ldl = l.adjoint() * l;
    out += op.rate * (l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl));
  }
  return out;
}

Mat8 Dissipator::loss_matrix() const {
  Mat8 k = Mat8::Zero();
  for (const auto &op : jumps) {
    Mat8 l = Mat8::Zero();
    for (const auto &e : op.entries)
      l(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) += e.amp;
    k += 0.5 * op.rate * (l.adjoint() * l);
  }
  return k;
}

Dissipator build_dissipator(const LevelStructure &s) {
  Dissipator d;
  for (Manifold lower : {Manifold::S12, Manifold::D32}) {
    const double rate = lower == Manifold::S12 ? s.decay.p_to_s : s.decay.p_to_d;
    if (rate == 0.0) continue;
    for (int q = -1; q <= 1; ++q) {
      JumpOperator op{"decay P->" + to_string(lower) + " q=" + std::to_string(q), rate, {}};
      for (const auto &c : s.decay_channels)
        if (s.levels[c.lower].manifold == lower && c.q == q)
          op.entries.push_back({c.lower, c.upper, c.cg});
      if (!op.entries.empty()) d.jumps.push_back(std::move(op));
    }
  }
  for (const auto &ch : s.dephasing_channels) {
    if (ch.rate == 0.0) continue;
    if (ch.a == ch.b) {
      for (std::size_t i = 0; i < kNumLevels; ++i)
        if (s.levels[i].manifold == ch.a)
          d.jumps.push_back({"dephasing within " + to_string(ch.a), ch.rate, {{i, i, 1.0}}});
    } else {
      JumpOperator op{"dephasing " + to_string(ch.a) + "-" + to_string(ch.b), 0.5 * ch.rate, {}};
      for (std::size_t i = 0; i < kNumLevels; ++i) {
        if (s.levels[i].manifold == ch.a) op.entries.push_back({i, i, 1.0});
        if (s.levels[i].manifold == ch.b) op.entries.push_back({i, i, -1.0});
      }
      d.jumps.push_back(std::move(op));
    }
  }
  if (s.depolarizing > 0.0) {
    for (std::size_t i = 0; i < kNumLevels; ++i)
      for (std::size_t j = 0; j < kNumLevels; ++j)
        if (s.levels[i].manifold == Manifold::D32 && s.levels[j].manifold == Manifold::D32)
          d.jumps.push_back({"depolarizing D32", s.depolarizing, {{i, j, 1.0}}});
  }
  return d;
}

namespace {

constexpr int kStateSize = 2 * 64 + 8;
using StateVec = Eigen::Matrix<double, kStateSize, 1>;

Eigen::Map<Mat8> rho_view(StateVec &y) { return Eigen::Map<Mat8>(reinterpret_cast<Complex *>(y.data())); }
Eigen::Map<const Mat8> rho_view(const StateVec &y) {
  return Eigen::Map<const Mat8>(reinterpret_cast<const Complex *>(y.data()));
}

// Real coordinates of a Hermitian matrix: diagonal, then Re/Im of the upper triangle.
Mat8 hermitian_basis(int k) {
  Mat8 e = Mat8::Zero();
  if (k < 8) {
    e(k, k) = 1.0;
    return e;
  }
  int idx = (k - 8) / 2;
  const bool imag = (k - 8) % 2;
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j)
      if (idx-- == 0) {
        e(i, j) = imag ? Complex(0.0, 1.0) : Complex(1.0, 0.0);
        e(j, i) = std::conj(e(i, j));
        return e;
      }
  return e;
}

Eigen::Matrix<double, 64, 1> hermitian_coords(const Mat8 &m) {
  Eigen::Matrix<double, 64, 1> x;
  int k = 0;
  for (int i = 0; i < 8; ++i) x[k++] = m(i, i).real();
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) {
      x[k++] = m(i, j).real();
      x[k++] = m(i, j).imag();
    }
  return x;
}

} // namespace

DensityState periodic_steady_state(const LevelStructure &s, const std::vector<LaserDrive> &drives,
                                   const DriveClock &clock, const EvolveSettings &settings) {
  const Dissipator dis = build_dissipator(s);
  const MasterEquation eq(s, drives, clock, &dis);
  double period = 1e-6;
  if (clock.beat != 0.0) {
    if (eq.fm_present())
      throw ValidationError("periodic steady state needs a single drive period (FM with nonzero beat)");
    period = kTwoPi / std::abs(clock.beat);
  } else if (eq.fm_present()) {
    period = kTwoPi / clock.rf;
  }

  auto rhs = [&](double t, const StateVec &yin, StateVec &dy) {
    Eigen::Map<Mat8> out = rho_view(dy);
    eq.rhs(t, rho_view(yin), out);
    dy.tail<8>().setZero();
  };
  OdeOptions opt;
  opt.rtol = settings.rtol;
  opt.atol = settings.atol;
  opt.max_steps = settings.max_steps;
  if (eq.fm_present()) opt.max_step = kTwoPi / clock.rf / settings.steps_per_rf_period;

  Eigen::Matrix<double, 64, 64> m;
  for (int k = 0; k < 64; ++k) {
    StateVec y = StateVec::Zero();
    rho_view(y) = hermitian_basis(k);
    double h = 0.0;
    integrate_dp45<kStateSize>(rhs, 0.0, period, y, opt, [](double, const StateVec &) { return true; }, h);
    m.col(k) = hermitian_coords(rho_view(y));
  }
  // (M - 1) x = 0 has a one-dimensional solution space; pin it with tr x = 1.
  Eigen::Matrix<double, 65, 64> a;
  a.topRows<64>() = m - Eigen::Matrix<double, 64, 64>::Identity();
  a.row(64).setZero();
  a.row(64).head<8>().setOnes();
  Eigen::Matrix<double, 65, 1> b = Eigen::Matrix<double, 65, 1>::Zero();
  b[64] = 1.0;
  const Eigen::Matrix<double, 64, 1> x = a.colPivHouseholderQr().solve(b);

  DensityState st;
  for (int k = 0; k < 64; ++k) st.rho += x[k] * hermitian_basis(k);
  st.rho = 0.5 * (st.rho + st.rho.adjoint()).eval();
  st.rho /= st.rho.trace().real();
  return st;
}

EvolveResult evolve(const DensityState &rho0, const LevelStructure &s,
                    const std::vector<LaserDrive> &drives, const DriveClock &clock,
                    const EvolveSettings &settings) {
  if (!(settings.transient >= 0.0) || !(settings.window > 0.0))
    throw ValidationError("transient must be >= 0 and window > 0");
  const auto r0 = rho0.check(true);
  if (r0.trace_error > kTraceTol || r0.hermiticity_error > kHermTol ||
      r0.min_eigenvalue < -kEigenTol)
    throw ValidationError("initial state is not a valid density matrix");

  const Dissipator dis = build_dissipator(s);
  const MasterEquation eq(s, drives, clock, &dis);

  constexpr int N = kStateSize;
  using Vec = StateVec;
  Vec y = Vec::Zero();
  if (!settings.periodic_warm_start) {
    rho_view(y) = rho0.rho;
  } else if (clock.beat != 0.0 && eq.fm_present()) {
    // Two incommensurate periods: start from the FM-free periodic state and
    // let the transient absorb the (small) modulation response.
    auto plain = drives;
    for (auto &d : plain) d.fm_amplitude = 0.0;
    rho_view(y) = periodic_steady_state(s, plain, clock, settings).rho;
  } else {
    rho_view(y) = periodic_steady_state(s, drives, clock, settings).rho;
  }

  bool accumulate = false;
  auto rhs = [&](double t, const Vec &yin, Vec &dy) {
    const Eigen::Map<const Mat8> rho(reinterpret_cast<const Complex *>(yin.data()));
    Eigen::Map<Mat8> out(reinterpret_cast<Complex *>(dy.data()));
    eq.rhs(t, rho, out);
    if (accumulate)
      for (int i = 0; i < 8; ++i) dy[128 + i] = rho(i, i).real();
    else
      dy.tail<8>().setZero();
  };

  double window = settings.window;
  if (settings.snap_window) {
    double period = 0.0;
    if (clock.beat != 0.0)
      period = kTwoPi / std::abs(clock.beat);
    else if (eq.fm_present())
      period = kTwoPi / clock.rf;
    if (period > 0.0 && period <= window) window = std::round(window / period) * period;
  }

  OdeOptions opt;
  opt.rtol = settings.rtol;
  opt.atol = settings.atol;
  opt.max_steps = settings.max_steps;
  if (eq.fm_present()) opt.max_step = kTwoPi / clock.rf / settings.steps_per_rf_period;

  EvolveResult result;
  auto &sum = result.summary;
  sum.window_start = rho0.t + settings.transient;
  sum.window_length = window;
  sum.min_eigenvalue = r0.min_eigenvalue;
  std::size_t step = 0;

  auto observer = [&](double t, const Vec &yv) {
    const Eigen::Map<const Mat8> rho(reinterpret_cast<const Complex *>(yv.data()));
    ++step;
    const double te = trace_error(rho);
    const double he = hermiticity_error(rho);
    sum.max_trace_error = std::max(sum.max_trace_error, te);
    sum.max_hermiticity_error = std::max(sum.max_hermiticity_error, he);
    bool eig_now = settings.eigen_check_stride > 0 && step % settings.eigen_check_stride == 0;
    double me = 0.0;
    if (eig_now) {
      me = min_eigenvalue(rho);
      sum.min_eigenvalue = std::min(sum.min_eigenvalue, me);
    }
    // Populations are a cheap necessary condition for positivity.
    for (int i = 0; i < 8; ++i) {
      const double p = rho(i, i).real();
      if (p < sum.min_eigenvalue) sum.min_eigenvalue = std::min(sum.min_eigenvalue, p);
    }
    if (te > 10 * kTraceTol || he > 10 * kHermTol || sum.min_eigenvalue < -10 * kEigenTol)
      throw IntegrationError("density-matrix invariant violated", t,
                             {te, he, eig_now ? me : sum.min_eigenvalue});
    if (settings.trajectory_stride > 0 && step % settings.trajectory_stride == 0) {
      TrajectorySample smp{t, {}};
      for (int i = 0; i < 8; ++i) smp.populations[static_cast<std::size_t>(i)] = rho(i, i).real();
      sum.samples.push_back(smp);
    }
    return true;
  };

  double h = 0.0;
  const double t0 = rho0.t;
  try {
    OdeStats st1 = integrate_dp45<N>(rhs, t0, t0 + settings.transient, y, opt, observer, h);
    accumulate = true;
    OdeStats st2 = integrate_dp45<N>(rhs, t0 + settings.transient,
                                     t0 + settings.transient + window, y, opt, observer, h);
    sum.accepted_steps = st1.accepted + st2.accepted;
    sum.rejected_steps = st1.rejected + st2.rejected;
    sum.rhs_calls = st1.rhs_calls + st2.rhs_calls;
  } catch (const StepUnderflow &e) {
    const Eigen::Map<const Mat8> rho(reinterpret_cast<const Complex *>(y.data()));
    throw IntegrationError(e.what(), t0, {trace_error(rho), hermiticity_error(rho), 0.0});
  }

  result.final_state.rho = Eigen::Map<const Mat8>(reinterpret_cast<const Complex *>(y.data()));
  result.final_state.t = t0 + settings.transient + window;
  const double me = min_eigenvalue(result.final_state.rho);
  sum.min_eigenvalue = std::min(sum.min_eigenvalue, me);
  if (me < -10 * kEigenTol)
    throw IntegrationError("final state lost positivity", result.final_state.t,
                           {trace_error(result.final_state.rho),
                            hermiticity_error(result.final_state.rho), me});
  for (int i = 0; i < 8; ++i)
    result.populations[static_cast<std::size_t>(i)] = y[128 + i] / window;
  return result;
}

double fluorescence(const Populations &p) {
  return p[level::P_m12] + p[level::P_p12];
}

void write_trajectory_csv(const std::string &path, const TrajectorySummary &summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t_s,S_m12,S_p12,D_m32,D_m12,D_p12,D_p32,P_m12,P_p12\n";
  out << std::setprecision(12);
  for (const auto &s : summary.samples) {
    out << s.t;
    for (double p : s.populations) out << ',' << p;
    out << '\n';
  }
}

} // namespace rotdop
