#pragma once

// Levenberg-Marquardt for weighted least squares with box bounds handled by
// smooth parameter transforms and a central-difference Jacobian.

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rotdop {

struct Bound {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct LsqOptions {
  int max_iterations = 200;
  std::size_t max_evaluations = 0; // 0 = unlimited
  double ftol = 1e-12;             // relative chi^2 decrease that counts as converged
  double xtol = 1e-10;             // relative step size that counts as converged
  double rel_step = 1e-6;          // central-difference step, relative to max(|u|, scale)
  double initial_lambda = 1e-3;
};

struct LsqResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  double chi2 = 0.0;
  double seed_chi2 = 0.0;
  /// (J^T J)^+ in parameter space at the optimum, not scaled by chi^2/nu.
  Eigen::MatrixXd covariance;
  int iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Residuals are expected to be pre-weighted: r_i = (model_i - data_i) / sigma_i.
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;

/// Minimizes sum r_i^2. `bounds` may be empty (unbounded) or hold one entry per
/// parameter. The seed is clamped into the bounds.
LsqResult levenberg_marquardt(const ResidualFn &f, const Eigen::VectorXd &x0,
                              const std::vector<Bound> &bounds = {},
                              const LsqOptions &options = {});

/// Correlation matrix from a covariance matrix (zero rows stay zero).
Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd &cov);

} // namespace rotdop
