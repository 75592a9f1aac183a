#include "rotdop/lsq.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "rotdop/units.hpp"

namespace rotdop {

namespace {

// x(u) maps the whole real line into [lo, hi] (MINUIT-style transforms).
struct Transform {
  std::vector<Bound> b;

  double to_x(std::size_t i, double u) const {
    const auto &bd = b[i];
    const bool lo = std::isfinite(bd.lo), hi = std::isfinite(bd.hi);
    if (lo && hi) return bd.lo + 0.5 * (bd.hi - bd.lo) * (1.0 + std::sin(u));
    if (lo) return bd.lo - 1.0 + std::sqrt(u * u + 1.0);
    if (hi) return bd.hi + 1.0 - std::sqrt(u * u + 1.0);
    return u;
  }

  double to_u(std::size_t i, double x) const {
    const auto &bd = b[i];
    const bool lo = std::isfinite(bd.lo), hi = std::isfinite(bd.hi);
    if (lo && hi) {
      const double s = std::clamp(2.0 * (x - bd.lo) / (bd.hi - bd.lo) - 1.0, -1.0, 1.0);
      return std::asin(s);
    }
    if (lo) {
      const double t = std::max(x, bd.lo) - bd.lo + 1.0;
      return std::sqrt(t * t - 1.0);
    }
    if (hi) {
      const double t = bd.hi - std::min(x, bd.hi) + 1.0;
      return std::sqrt(t * t - 1.0);
    }
    return x;
  }

  Eigen::VectorXd x_of(const Eigen::VectorXd &u) const {
    Eigen::VectorXd x(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) x[i] = to_x(static_cast<std::size_t>(i), u[i]);
    return x;
  }
};

} // namespace

Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd &cov) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      const double d = std::sqrt(cov(i, i) * cov(j, j));
      c(i, j) = d > 0.0 ? cov(i, j) / d : 0.0;
    }
  return c;
}

LsqResult levenberg_marquardt(const ResidualFn &f, const Eigen::VectorXd &x0,
                              const std::vector<Bound> &bounds, const LsqOptions &opt) {
  const auto n = static_cast<std::size_t>(x0.size());
  Transform tr{bounds.empty() ? std::vector<Bound>(n) : bounds};
  if (tr.b.size() != n) throw ValidationError("one bound per parameter required");
  for (const auto &bd : tr.b)
    if (!(bd.lo < bd.hi)) throw ValidationError("empty parameter bound");

  LsqResult res;
  auto eval = [&](const Eigen::VectorXd &u) {
    ++res.evaluations;
    Eigen::VectorXd r = f(tr.x_of(u));
    if (!r.allFinite()) r.setConstant(std::numeric_limits<double>::infinity());
    return r;
  };
  auto budget_left = [&](std::size_t need) {
    return opt.max_evaluations == 0 || res.evaluations + need <= opt.max_evaluations;
  };

  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) u[static_cast<Eigen::Index>(i)] = tr.to_u(i, x0[static_cast<Eigen::Index>(i)]);
  Eigen::VectorXd r = eval(u);
  double chi2 = r.squaredNorm();
  res.seed_chi2 = chi2;
  if (!std::isfinite(chi2)) throw ValidationError("residuals are not finite at the seed");

  auto jacobian = [&](const Eigen::VectorXd &uu) {
    Eigen::MatrixXd j(r.size(), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double h = opt.rel_step * std::max(std::abs(uu[kk]), 1.0);
      Eigen::VectorXd up = uu, dn = uu;
      up[kk] += h;
      dn[kk] -= h;
      j.col(kk) = (eval(up) - eval(dn)) / (2.0 * h);
    }
    return j;
  };

  double lambda = opt.initial_lambda;
  res.message = "iteration limit reached";
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (!budget_left(2 * n + 1)) {
      res.message = "evaluation budget exhausted";
      break;
    }
    const Eigen::MatrixXd j = jacobian(u);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-15 * std::max(chi2, 1e-300)) {
      res.converged = true;
      res.message = "gradient vanished";
      break;
    }
    bool improved = false;
    bool small_step = false;
    while (lambda < 1e12) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index k = 0; k < a.rows(); ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Eigen::VectorXd du = a.ldlt().solve(-g);
      if (!budget_left(1)) break;
      const Eigen::VectorXd un = u + du;
      const Eigen::VectorXd rn = eval(un);
      const double cn = rn.squaredNorm();
      small_step = du.norm() <= opt.xtol * (u.norm() + opt.xtol);
      if (cn < chi2) {
        const double rel = (chi2 - cn) / std::max(chi2, 1e-300);
        u = un;
        r = rn;
        chi2 = cn;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < opt.ftol || small_step) {
          res.converged = true;
          res.message = "converged";
        }
        break;
      }
      lambda *= 10.0;
      if (small_step) break;
    }
    if (res.converged) break;
    if (!improved) {
      // No descent possible even with tiny steps: a (local) minimum.
      res.converged = small_step || lambda >= 1e12;
      res.message = res.converged ? "converged (no further decrease)" : "evaluation budget exhausted";
      break;
    }
  }

  res.x = tr.x_of(u);
  res.residuals = r;
  res.chi2 = chi2;

  // Covariance in x-space from a Jacobian taken directly in x.
  if (budget_left(2 * n)) {
    Eigen::MatrixXd jx(r.size(), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const auto &bd = tr.b[k];
      double h = opt.rel_step * std::max(std::abs(res.x[kk]), 1e-3);
      if (std::isfinite(bd.lo) && std::isfinite(bd.hi)) h = std::min(h, 1e-3 * (bd.hi - bd.lo));
      Eigen::VectorXd up = res.x, dn = res.x;
      up[kk] = std::min(up[kk] + h, bd.hi);
      dn[kk] = std::max(dn[kk] - h, bd.lo);
      ++res.evaluations;
      const Eigen::VectorXd rp = f(up);
      ++res.evaluations;
      const Eigen::VectorXd rm = f(dn);
      jx.col(kk) = (rp - rm) / (up[kk] - dn[kk]);
    }
    const Eigen::MatrixXd jtj = jx.transpose() * jx;
    res.covariance = jtj.completeOrthogonalDecomposition().pseudoInverse();
  } else {
    res.covariance = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n),
                                               std::numeric_limits<double>::quiet_NaN());
  }
  return res;
}

} // namespace rotdop
