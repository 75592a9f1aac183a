#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the integrator or the analytic formulas under test.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "rotdop/analytic.hpp"
#include "rotdop/beams.hpp"
#include "rotdop/dynamics.hpp"

namespace oracle {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;

/// Column-stacking Liouvillian of drho/dt = -i[H, rho] + sum_k D[L_k] rho.
inline CMat liouvillian(const CMat &h, const std::vector<CMat> &jumps) {
  const auto n = h.rows();
  const CMat id = CMat::Identity(n, n);
  auto kron = [](const CMat &a, const CMat &b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  };
  // vec(A X B) = (B^T kron A) vec(X)
  CMat l = cd(0, -1) * (kron(id, h) - kron(h.transpose(), id));
  for (const auto &c : jumps) {
    const CMat cdc = c.adjoint() * c;
    l += kron(c.conjugate(), c) - 0.5 * kron(id, cdc) - 0.5 * kron(cdc.transpose(), id);
  }
  return l;
}

/// Trace-one density matrix spanning the (assumed one-dimensional) kernel of l.
inline CMat kernel_state(const CMat &l, Eigen::Index n) {
  Eigen::JacobiSVD<CMat> svd(l, Eigen::ComputeFullV);
  const Eigen::VectorXcd v = svd.matrixV().col(l.cols() - 1);
  CMat rho(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) rho(i, j) = v[j * n + i];
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

/// Time-averaged excited population of the driven three-level system
/// {e, 1, 2} over one RF period in its periodic steady state. The two
/// arms see opposite FM (index beta); arm 2 is detuned by `shift` from arm 1.
/// Brute force: RK4 propagation of the 9x9 Liouvillian over one period.
inline double three_level_excited(const rotdop::ThreeLevelParams &p, double beta, double shift,
                                  int steps = 4000, int nmax = 25) {
  const double w = p.rf, period = 2.0 * M_PI / w;
  std::vector<double> jn(2 * nmax + 1);
  for (int n = -nmax; n <= nmax; ++n) jn[n + nmax] = std::cyl_bessel_j(std::abs(n), beta) * ((n < 0 && (n & 1)) ? -1.0 : 1.0);
  // Basis order e, 1, 2. Frame: e rotates with arm 1, state 2 with the shift.
  auto hamiltonian = [&](double t) {
    CMat h = CMat::Zero(3, 3);
    h(0, 0) = -p.detuning;
    h(2, 2) = shift;
    cd c1 = 0.0, c2 = 0.0;
    for (int n = -nmax; n <= nmax; ++n) {
      const cd f = std::exp(cd(0, n * w * t)) * std::pow(cd(0, 1), n) * jn[n + nmax];
      c1 += f;
      c2 += (n & 1 ? -1.0 : 1.0) * f;
    }
    h(0, 1) = 0.5 * p.rabi * c1;
    h(0, 2) = 0.5 * p.rabi * c2;
    h(1, 0) = std::conj(h(0, 1));
    h(2, 0) = std::conj(h(0, 2));
    return h;
  };
  std::vector<CMat> jumps;
  auto op = [](int i, int j, double rate) {
    CMat m = CMat::Zero(3, 3);
    m(i, j) = std::sqrt(rate);
    return m;
  };
  jumps.push_back(op(1, 0, 0.5 * p.decay));
  jumps.push_back(op(2, 0, 0.5 * p.decay));
  jumps.push_back(op(0, 0, 2.0 * p.gamma)); // coherence e-g decays at gamma
  if (p.gamma_prime > 0.0) {
    jumps.push_back(op(1, 2, p.gamma_prime));
    jumps.push_back(op(2, 1, p.gamma_prime));
  }
  const double dt = period / steps;
  auto gen = [&](double t) { return liouvillian(hamiltonian(t), jumps); };
  // Monodromy and the running integral of the excited population operator.
  CMat m = CMat::Identity(9, 9);
  std::vector<CMat> history;
  history.reserve(static_cast<std::size_t>(steps) + 1);
  history.push_back(m);
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const CMat l0 = gen(t), lh = gen(t + 0.5 * dt), l1 = gen(t + dt);
    const CMat k1 = l0 * m, k2 = lh * (m + 0.5 * dt * k1), k3 = lh * (m + 0.5 * dt * k2), k4 = l1 * (m + dt * k3);
    m += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    history.push_back(m);
  }
  const CMat fixed = m - CMat::Identity(9, 9);
  Eigen::JacobiSVD<CMat> svd(fixed, Eigen::ComputeFullV);
  Eigen::VectorXcd v = svd.matrixV().col(8);
  v /= (v[0] + v[4] + v[8]);
  // Trapezoidal average of rho_ee(t) = (M(t) v)[0].
  double acc = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double pe = (history[static_cast<std::size_t>(k)].row(0) * v)(0).real();
    acc += (k == 0 || k == steps) ? 0.5 * pe : pe;
  }
  return acc / steps;
}

/// Dark-resonance depth 1 - p_e(on) / p_e(off) of the brute-force model.
inline double three_level_depth(const rotdop::ThreeLevelParams &p, double beta) {
  const double off = three_level_excited(p, beta, p.rf / 100.0);
  const double on = three_level_excited(p, beta, 0.0);
  return 1.0 - on / off;
}

/// Phase of an LG_p^l mode, with the propagation factor e^{i(kz - wt)} chosen
/// so that a plane wave gives -k v_z: k z + k r^2 z / (2 (z^2 + z_R^2))
/// - (2p + |l| + 1) atan(z / z_R) + l phi.
inline double lg_phase(const rotdop::BeamGeometry &b, double x, double y, double z) {
  const double k = b.k(), zr = b.rayleigh_range();
  const double r2 = x * x + y * y;
  return k * z + k * r2 * z / (2.0 * (z * z + zr * zr)) -
         (2.0 * b.p() + std::abs(b.l()) + 1.0) * std::atan(z / zr) + b.l() * std::atan2(y, x);
}

/// -dPhi/dt along the straight path p + v t: Richardson-extrapolated central
/// differences with the azimuth unwrapped.
inline double fd_doppler_shift(const rotdop::BeamGeometry &b, const rotdop::Vec3 &p, const rotdop::Vec3 &v) {
  auto d = [&](double h) {
    auto at = [&](double s) {
      return lg_phase(b, p[0] - b.x0() + s * v[0], p[1] - b.y0() + s * v[1], p[2] + s * v[2]);
    };
    double diff = at(h) - at(-h);
    const double wrap = 2.0 * M_PI * b.l();
    if (wrap != 0.0) diff -= wrap * std::round(diff / wrap);
    return diff / (2.0 * h);
  };
  const double h = 5e-12; // seconds; displacement ~ 1 nm
  return -(4.0 * d(h / 2.0) - d(h)) / 3.0;
}

} // namespace oracle
