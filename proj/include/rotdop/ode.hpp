#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with adaptive step control
// for fixed-size real state vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rotdop {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 0.0; // 0 = unbounded
  double initial_step = 0.0;
  std::size_t max_steps = 50'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_calls = 0;
  double last_step = 0.0;
};

class StepUnderflow : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Integrates dy/dt = f(t, y) from t0 to t1 in place. `observer(t, y)` runs
/// after every accepted step and may return false to stop early.
/// `h` carries the step size in and out so consecutive calls continue smoothly.
template <int N, class Rhs, class Observer>
OdeStats integrate_dp45(Rhs &&f, double t0, double t1, Eigen::Matrix<double, N, 1> &y,
                        const OdeOptions &opt, Observer &&observer, double &h) {
  using Vec = Eigen::Matrix<double, N, 1>;
  // Butcher tableau (Dormand & Prince 1980).
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeStats st;
  if (t1 <= t0) return st;
  const double span = t1 - t0;
  const double hmax = opt.max_step > 0.0 ? opt.max_step : span;
  if (!(h > 0.0)) h = opt.initial_step > 0.0 ? opt.initial_step : std::min(hmax, span) * 1e-3;
  h = std::min(h, hmax);

  Vec k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, err;
  f(t0, y, k1);
  ++st.rhs_calls;
  double t = t0;
  double err_prev = 1e-4;
  bool last_rejected = false;

  while (t < t1) {
    if (st.accepted + st.rejected >= opt.max_steps)
      throw StepUnderflow("step budget exhausted at t = " + std::to_string(t));
    bool final_step = false;
    double hs = h;
    if (t + hs >= t1 || t + 1.01 * hs >= t1) {
      hs = t1 - t;
      final_step = true;
    }
    if (hs < 1e-14 * std::max(std::abs(t), span))
      throw StepUnderflow("step size underflow at t = " + std::to_string(t));

    ytmp = y + hs * (a21 * k1);
    f(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    f(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + hs, ytmp, k6);
    ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + hs, ynew, k7);
    st.rhs_calls += 6;

    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const Vec scale = opt.atol + opt.rtol * y.cwiseAbs().cwiseMax(ynew.cwiseAbs()).array();
    const double en = std::sqrt((err.array() / scale.array()).square().mean());

    if (en <= 1.0) {
      t = final_step ? t1 : t + hs;
      y = ynew;
      k1 = k7;
      ++st.accepted;
      st.last_step = hs;
      // PI controller (Gustafsson), as in Hairer's DOPRI5.
      double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.17) * std::pow(err_prev, 0.04);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
      if (!final_step) h = std::min(hs * fac, hmax);
      err_prev = std::max(en, 1e-4);
      last_rejected = false;
      if (!observer(t, y)) break;
    } else {
      ++st.rejected;
      h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
  }
  return st;
}

} // namespace rotdop
