#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "elicitd/net.hpp"
#include "json.hpp"

namespace elicitd::elicit {

// T probabilities from Monte-Carlo dropout passes over one input.
struct ProbabilitySample {
  std::vector<double> values;
  std::uint64_t seed = 0;

  std::size_t size() const { return values.size(); }
  // Throws DomainError unless T >= 2 and every value lies in [0, 1].
  void validate() const;

  bool operator==(const ProbabilitySample&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool operator==(const Interval&) const = default;
};

inline constexpr double kMaxConcentration = 1e6;
inline constexpr double kMinConcentration = 1e-3;
inline constexpr double kMinVariance = 1e-12;

struct ElicitedDistribution {
  double alpha = 1.0;
  double beta = 1.0;
  double sample_mean = 0.0;
  double sample_var = 0.0;
  Interval ci95;
  // Set when the moments admit no proper Beta fit; alpha and beta then hold a
  // surrogate with the sample mean and a capped concentration.
  bool degenerate = false;
  std::size_t T = 0;
  std::uint64_t seed = 0;

  double mean() const { return alpha / (alpha + beta); }
  bool operator==(const ElicitedDistribution&) const = default;
};

// Bin probabilities over B equal-width bins on [0, 1].
struct DiscreteDistribution {
  std::vector<double> probs;

  std::size_t bins() const { return probs.size(); }
  // Nonnegative, sums to 1 within 1e-9.
  void validate() const;
};

inline constexpr std::size_t kDefaultSampleSize = 100;

// T McSample-mode forward passes. Pass i draws its dropout masks from a
// sub-stream derived from (seed, i), so the result depends only on the seed.
ProbabilitySample mc_sample(const net::NetworkSpec& spec,
                            const net::NetworkParams& params,
                            std::span<const double> input,
                            std::size_t T = kDefaultSampleSize,
                            std::uint64_t seed = 0);

double sample_mean(std::span<const double> values);
// Unbiased (n - 1) variance.
double sample_variance(std::span<const double> values);

// Percentile interval with linear interpolation between order statistics.
Interval credible_interval(std::span<const double> values, double level = 0.95);
Interval credible_interval(const ProbabilitySample& sample, double level = 0.95);

// Equal-tailed interval from the Beta quantile function. Not used by the
// diagnostics; exposed for comparison with the sample interval.
Interval beta_credible_interval(double alpha, double beta, double level = 0.95);

// Method of moments: c = m(1-m)/v - 1, alpha = m c, beta = (1-m) c.
ElicitedDistribution fit_beta_mom(const ProbabilitySample& sample);

// Exact moment inversion without the degenerate fallback. Throws DomainError
// when 0 < v < m(1-m) fails.
std::pair<double, double> beta_from_moments(double mean, double variance);

std::size_t bin_index(double x, std::size_t bins);

// Normalized Shannon entropy of a B-bin histogram of the sample, in [0, 1].
double distribution_entropy(std::span<const double> values, std::size_t bins = 10);
double distribution_entropy(const ProbabilitySample& sample, std::size_t bins = 10);

// Binary entropy in bits of a Bernoulli(q) event.
double point_entropy(double q);

// D_KL(Q || P) in nats. Throws SupportError when Q has mass where P has none.
double kl_divergence(const DiscreteDistribution& q, const DiscreteDistribution& p);

DiscreteDistribution discretize_beta(double alpha, double beta, std::size_t bins);
DiscreteDistribution discretize(const ProbabilitySample& sample, std::size_t bins);
// Beta bin masses, or the sample histogram when `dist` is degenerate. A
// degenerate distribution without a sample falls back to a point mass at its
// mean.
DiscreteDistribution discretize(const ElicitedDistribution& dist, std::size_t bins,
                                const ProbabilitySample* sample = nullptr);

// {alpha, beta, mean, var, ci95: [lo, hi], degenerate, T, seed}
nlohmann::json to_json(const ElicitedDistribution& dist);
ElicitedDistribution elicited_from_json(const nlohmann::json& j);

// One probability per line, printed with round-trip precision.
void write_sample(const ProbabilitySample& sample, const std::filesystem::path& path);
ProbabilitySample read_sample(const std::filesystem::path& path);

}  // namespace elicitd::elicit
