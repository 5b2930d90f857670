#include "elicitd/elicitation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "elicitd/beta.hpp"
#include "elicitd/errors.hpp"
#include "elicitd/text.hpp"

namespace elicitd::elicit {

using nlohmann::json;

void ProbabilitySample::validate() const {
  if (values.size() < 2) {
    throw DomainError("a probability sample needs T >= 2 values");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("sample value outside [0, 1]: " + std::to_string(v));
    }
  }
}

void DiscreteDistribution::validate() const {
  if (probs.empty()) throw DomainError("empty discrete distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DomainError("discrete distribution has a negative or non-finite bin");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("discrete distribution sums to " + text::format_double(total));
  }
}

ProbabilitySample mc_sample(const net::NetworkSpec& spec,
                            const net::NetworkParams& params,
                            std::span<const double> input, std::size_t T,
                            std::uint64_t seed) {
  if (T < 2) throw DomainError("mc_sample needs T >= 2");
  ProbabilitySample sample;
  sample.seed = seed;
  sample.values.reserve(T);
  for (std::size_t pass = 0; pass < T; ++pass) {
    Rng rng(derive_seed(seed, 0, pass));
    const auto out = net::forward(spec, params, input, net::Mode::kMcSample, &rng);
    sample.values.push_back(net::positive_probability(out));
  }
  return sample;
}

namespace {

// Mean of the offsets from the first value; exact for constant samples.
double shifted_mean(std::span<const double> values) {
  const double origin = values.front();
  double total = 0.0;
  for (double v : values) total += v - origin;
  return total / static_cast<double>(values.size());
}

}  // namespace

double sample_mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean of an empty sample");
  return values.front() + shifted_mean(values);
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw DomainError("variance needs at least two values");
  const double origin = values.front();
  const double md = shifted_mean(values);
  double ss = 0.0;
  for (double v : values) {
    const double d = (v - origin) - md;
    ss += d * d;
  }
  return ss / static_cast<double>(values.size() - 1);
}

Interval credible_interval(std::span<const double> values, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("credible level must lie in (0, 1)");
  }
  if (values.empty()) throw DomainError("credible interval of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto percentile = [&](double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(h));
    const std::size_t above = std::min(below + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(below);
    return sorted[below] + frac * (sorted[above] - sorted[below]);
  };
  const double tail = (1.0 - level) / 2.0;
  Interval ci{percentile(tail), percentile(1.0 - tail)};
  ci.hi = std::max(ci.lo, ci.hi);
  return ci;
}

Interval credible_interval(const ProbabilitySample& sample, double level) {
  return credible_interval(std::span<const double>(sample.values), level);
}

Interval beta_credible_interval(double alpha, double beta, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("credible level must lie in (0, 1)");
  }
  const double tail = (1.0 - level) / 2.0;
  return {beta::quantile(alpha, beta, tail), beta::quantile(alpha, beta, 1.0 - tail)};
}

std::pair<double, double> beta_from_moments(double mean, double variance) {
  if (!(mean > 0.0 && mean < 1.0) || !(variance > 0.0) ||
      !(variance < mean * (1.0 - mean))) {
    throw DomainError("moments admit no Beta distribution");
  }
  const double c = mean * (1.0 - mean) / variance - 1.0;
  return {mean * c, (1.0 - mean) * c};
}

ElicitedDistribution fit_beta_mom(const ProbabilitySample& sample) {
  sample.validate();
  ElicitedDistribution out;
  out.sample_mean = sample_mean(sample.values);
  out.sample_var = sample_variance(sample.values);
  out.ci95 = credible_interval(sample, 0.95);
  out.T = sample.size();
  out.seed = sample.seed;

  const double m = out.sample_mean;
  const double v = out.sample_var;
  const double bound = m * (1.0 - m);
  if (m > 0.0 && m < 1.0 && v > kMinVariance && v < bound) {
    std::tie(out.alpha, out.beta) = beta_from_moments(m, v);
    if (out.alpha + out.beta <= kMaxConcentration) return out;
  }
  // Surrogate: mean kept (clamped off the boundary), concentration capped.
  out.degenerate = true;
  const double mc = std::clamp(m, 1e-9, 1.0 - 1e-9);
  const double c = (m > 0.0 && m < 1.0 && v >= bound) ? kMinConcentration
                                                      : kMaxConcentration;
  out.alpha = mc * c;
  out.beta = (1.0 - mc) * c;
  return out;
}

std::size_t bin_index(double x, std::size_t bins) {
  const double scaled = std::floor(std::clamp(x, 0.0, 1.0) * static_cast<double>(bins));
  return std::min(bins - 1, static_cast<std::size_t>(scaled));
}

double distribution_entropy(std::span<const double> values, std::size_t bins) {
  if (bins < 2) throw DomainError("entropy histogram needs at least two bins");
  if (values.empty()) throw DomainError("entropy of an empty sample");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) ++counts[bin_index(v, bins)];
  // Equal occupied counts: the entropy is exactly ln(occupied).
  std::size_t occupied = 0, first = 0;
  bool equal = true;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    if (occupied++ == 0) first = c;
    equal = equal && c == first;
  }
  if (equal) {
    return occupied == bins ? 1.0
                            : std::log(static_cast<double>(occupied)) /
                                  std::log(static_cast<double>(bins));
  }
  const double n = static_cast<double>(values.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(bins)), 0.0, 1.0);
}

double distribution_entropy(const ProbabilitySample& sample, std::size_t bins) {
  return distribution_entropy(std::span<const double>(sample.values), bins);
}

double point_entropy(double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw DomainError("point entropy needs q in [0, 1]");
  }
  if (q == 0.0 || q == 1.0) return 0.0;
  return std::min(1.0, -q * std::log2(q) - (1.0 - q) * std::log2(1.0 - q));
}

double kl_divergence(const DiscreteDistribution& q, const DiscreteDistribution& p) {
  if (q.bins() != p.bins()) {
    throw ShapeError("KL divergence needs distributions on the same grid");
  }
  q.validate();
  p.validate();
  double kl = 0.0;
  for (std::size_t i = 0; i < q.bins(); ++i) {
    if (q.probs[i] == 0.0) continue;
    if (p.probs[i] == 0.0) {
      throw SupportError("Q has mass in bin " + std::to_string(i) +
                         " where P has none");
    }
    kl += q.probs[i] * std::log(q.probs[i] / p.probs[i]);
  }
  return std::max(0.0, kl);
}

DiscreteDistribution discretize_beta(double alpha, double beta, std::size_t bins) {
  if (bins < 2) throw DomainError("discretization needs at least two bins");
  const double m = beta::mean(alpha, beta);
  DiscreteDistribution out;
  out.probs.resize(bins);
  const double width = 1.0 / static_cast<double>(bins);
  double total = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double lo = static_cast<double>(i) * width;
    const double hi = i + 1 == bins ? 1.0 : static_cast<double>(i + 1) * width;
    // Upper-tail bins use the survival function to keep tiny masses.
    const double mass = lo >= m ? beta::sf(alpha, beta, lo) - beta::sf(alpha, beta, hi)
                                : beta::cdf(alpha, beta, hi) - beta::cdf(alpha, beta, lo);
    out.probs[i] = std::max(0.0, mass);
    total += out.probs[i];
  }
  for (double& p : out.probs) p /= total;
  return out;
}

DiscreteDistribution discretize(const ProbabilitySample& sample, std::size_t bins) {
  if (bins < 2) throw DomainError("discretization needs at least two bins");
  if (sample.values.empty()) throw DomainError("cannot discretize an empty sample");
  DiscreteDistribution out;
  out.probs.assign(bins, 0.0);
  for (double v : sample.values) out.probs[bin_index(v, bins)] += 1.0;
  for (double& p : out.probs) p /= static_cast<double>(sample.values.size());
  return out;
}

DiscreteDistribution discretize(const ElicitedDistribution& dist, std::size_t bins,
                                const ProbabilitySample* sample) {
  if (!dist.degenerate) return discretize_beta(dist.alpha, dist.beta, bins);
  if (sample != nullptr) return discretize(*sample, bins);
  if (bins < 2) throw DomainError("discretization needs at least two bins");
  DiscreteDistribution out;
  out.probs.assign(bins, 0.0);
  out.probs[bin_index(dist.sample_mean, bins)] = 1.0;
  return out;
}

json to_json(const ElicitedDistribution& d) {
  return {{"alpha", d.alpha},       {"beta", d.beta},
          {"mean", d.sample_mean},  {"var", d.sample_var},
          {"ci95", {d.ci95.lo, d.ci95.hi}},
          {"degenerate", d.degenerate},
          {"T", d.T},               {"seed", d.seed}};
}

ElicitedDistribution elicited_from_json(const json& j) {
  try {
    ElicitedDistribution d;
    d.alpha = j.at("alpha").get<double>();
    d.beta = j.at("beta").get<double>();
    d.sample_mean = j.at("mean").get<double>();
    d.sample_var = j.at("var").get<double>();
    d.ci95 = {j.at("ci95").at(0).get<double>(), j.at("ci95").at(1).get<double>()};
    d.degenerate = j.at("degenerate").get<bool>();
    d.T = j.at("T").get<std::size_t>();
    d.seed = j.at("seed").get<std::uint64_t>();
    return d;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed elicited distribution: ") + e.what());
  }
}

void write_sample(const ProbabilitySample& sample, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (double v : sample.values) out << text::format_double(v) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

ProbabilitySample read_sample(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  ProbabilitySample sample;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto v = text::parse_double(line);
    if (!v) throw DataError("bad probability on line " + std::to_string(row));
    sample.values.push_back(*v);
  }
  return sample;
}

}  // namespace elicitd::elicit
