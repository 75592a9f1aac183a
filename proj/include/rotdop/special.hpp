#pragma once

#include <vector>

namespace rotdop {

/// J_0(x) ... J_nmax(x) by downward recurrence, normalized with
/// J_0 + 2 sum_k J_2k = 1. Accurate to ~1e-13 for |x| <= 5, nmax <= 60.
std::vector<double> bessel_j_table(double x, int nmax);

/// J_n(x) for any integer n (negative orders through J_-n = (-1)^n J_n).
double bessel_j(int n, double x);

/// Smallest n with sum_{|k|<=n} J_k(x)^2 > 1 - tol, capped at `cap`.
int bessel_truncation(double x, double tol = 1e-12, int cap = 60);

/// p-quantile of the chi-squared distribution with nu degrees of freedom.
double chi2_quantile(int nu, double p);

} // namespace rotdop
