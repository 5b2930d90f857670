#pragma once

namespace elicitd::beta {

// Density of Beta(a, b) at x in [0, 1]. Throws DomainError for a, b <= 0.
double pdf(double a, double b, double x);

// Regularized incomplete beta I_x(a, b).
double cdf(double a, double b, double x);

// 1 - cdf, computed without cancellation in the upper tail.
double sf(double a, double b, double x);

// Inverse of cdf by bisection; accurate to ~1e-12 in x.
double quantile(double a, double b, double p);

double mean(double a, double b);
double variance(double a, double b);

// Mode for a, b > 1.
double mode(double a, double b);

}  // namespace elicitd::beta
