#include "elicitd/beta.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "elicitd/errors.hpp"

namespace elicitd::beta {

namespace {

void require_params(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("beta parameters must be positive and finite, got (" +
                      std::to_string(a) + ", " + std::to_string(b) + ")");
  }
}

void require_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("beta argument must lie in [0, 1], got " + std::to_string(x));
  }
}

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the incomplete beta function (modified Lentz).
double continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 200000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericsError("incomplete beta continued fraction did not converge");
}

// I_x(a, b) evaluated directly from the continued fraction; only accurate
// for x < (a + 1) / (a + b + 2).
double lower_series(double a, double b, double x) {
  const double log_front =
      a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  return std::exp(log_front) * continued_fraction(a, b, x) / a;
}

}  // namespace

double pdf(double a, double b, double x) {
  require_params(a, b);
  require_unit(x);
  if (x == 0.0) {
    if (a < 1.0) return std::numeric_limits<double>::infinity();
    return a == 1.0 ? std::exp(-log_beta(a, b)) : 0.0;
  }
  if (x == 1.0) {
    if (b < 1.0) return std::numeric_limits<double>::infinity();
    return b == 1.0 ? std::exp(-log_beta(a, b)) : 0.0;
  }
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) -
                  log_beta(a, b));
}

double cdf(double a, double b, double x) {
  require_params(a, b);
  require_unit(x);
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  if (x < (a + 1.0) / (a + b + 2.0)) return lower_series(a, b, x);
  return 1.0 - lower_series(b, a, 1.0 - x);
}

double sf(double a, double b, double x) {
  require_params(a, b);
  require_unit(x);
  if (x == 0.0) return 1.0;
  if (x == 1.0) return 0.0;
  // I_x(a, b) = 1 - I_{1-x}(b, a)
  const double y = 1.0 - x;
  if (y < (b + 1.0) / (a + b + 2.0)) return lower_series(b, a, y);
  return 1.0 - lower_series(a, b, x);
}

double quantile(double a, double b, double p) {
  require_params(a, b);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("quantile level must lie in [0, 1]");
  }
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double mean(double a, double b) {
  require_params(a, b);
  return a / (a + b);
}

double variance(double a, double b) {
  require_params(a, b);
  const double s = a + b;
  return a * b / (s * s * (s + 1.0));
}

double mode(double a, double b) {
  require_params(a, b);
  if (!(a > 1.0 && b > 1.0)) {
    throw DomainError("beta mode is interior only for a, b > 1");
  }
  return (a - 1.0) / (a + b - 2.0);
}

}  // namespace elicitd::beta
