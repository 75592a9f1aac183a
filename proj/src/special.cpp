#include "rotdop/special.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "rotdop/units.hpp"

namespace rotdop {

std::vector<double> bessel_j_table(double x, int nmax) {
  if (nmax < 0) throw ValidationError("bessel order must be non-negative");
  std::vector<double> out(static_cast<std::size_t>(nmax) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double ax = std::abs(x);
  // Start well above both the requested order and the turning point |x|.
  int start = std::max(nmax, static_cast<int>(ax)) + 20 +
              static_cast<int>(std::sqrt(40.0 * (std::max(nmax, static_cast<int>(ax)) + 1)));
  if (start % 2) ++start;

  const double big = 1e250;
  double jp1 = 0.0;
  double j = 1e-300;
  double norm = 0.0;
  std::vector<double> buf(static_cast<std::size_t>(start) + 1, 0.0);
  buf[static_cast<std::size_t>(start)] = j;
  for (int n = start; n > 0; --n) {
    const double jm1 = 2.0 * n / ax * j - jp1;
    jp1 = j;
    j = jm1;
    buf[static_cast<std::size_t>(n - 1)] = j;
    if (std::abs(j) > big) {
      for (int m = n - 1; m <= start; ++m) buf[static_cast<std::size_t>(m)] /= big;
      j /= big;
      jp1 /= big;
    }
  }
  norm = buf[0];
  for (int n = 2; n <= start; n += 2) norm += 2.0 * buf[static_cast<std::size_t>(n)];
  for (int n = 0; n <= nmax; ++n) {
    double v = buf[static_cast<std::size_t>(n)] / norm;
    if (x < 0.0 && (n % 2)) v = -v;
    out[static_cast<std::size_t>(n)] = v;
  }
  return out;
}

double bessel_j(int n, double x) {
  const int an = std::abs(n);
  const double v = bessel_j_table(x, an)[static_cast<std::size_t>(an)];
  return (n < 0 && (an % 2)) ? -v : v;
}

int bessel_truncation(double x, double tol, int cap) {
  const auto j = bessel_j_table(x, cap);
  double sum = j[0] * j[0];
  if (sum > 1.0 - tol) return 0;
  for (int n = 1; n <= cap; ++n) {
    sum += 2.0 * j[static_cast<std::size_t>(n)] * j[static_cast<std::size_t>(n)];
    if (sum > 1.0 - tol) return n;
  }
  return cap;
}

double chi2_quantile(int nu, double p) {
  if (nu < 1) throw ValidationError("chi-squared degrees of freedom must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("probability must lie in (0, 1)");
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(nu));
  return boost::math::quantile(dist, p);
}

} // namespace rotdop
