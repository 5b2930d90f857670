#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "elicitd/beta.hpp"
#include "elicitd/elicitation.hpp"
#include "elicitd/errors.hpp"
#include "oracles.hpp"

using namespace elicitd;
using namespace elicitd::elicit;

namespace {

ProbabilitySample sample_of(std::vector<double> v, std::uint64_t seed = 0) {
  return ProbabilitySample{std::move(v), seed};
}

}  // namespace

TEST_CASE("beta cdf against the Boost incomplete beta") {
  for (double a : {0.5, 1.0, 2.0, 5.0, 15.718, 40.0}) {
    for (double b : {0.5, 1.0, 2.502, 7.0, 20.0}) {
      for (int i = 0; i <= 40; ++i) {
        const double x = i / 40.0;
        CHECK(std::abs(beta::cdf(a, b, x) - boost::math::ibeta(a, b, x)) <= 1e-8);
        CHECK(std::abs(beta::sf(a, b, x) - boost::math::ibetac(a, b, x)) <= 1e-8);
      }
    }
  }
}

TEST_CASE("beta cdf and pdf examples") {
  for (double x : {0.0, 0.25, 1.0}) CHECK(beta::cdf(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-14));
  CHECK(std::abs(beta::cdf(2.0, 2.0, 0.5) - 0.5) < 1e-14);
  CHECK(beta::pdf(1.0, 1.0, 0.3) == doctest::Approx(1.0));
  CHECK(beta::pdf(2.0, 2.0, 0.5) == doctest::Approx(1.5));

  // Mode (a-1)/(a+b-2) for the fitted Beta(15.718, 2.502).
  const double a = 15.718, b = 2.502;
  CHECK(std::abs(beta::mode(a, b) - 0.907398273736128) < 1e-12);
  const double m = beta::mode(a, b);
  CHECK(beta::pdf(a, b, m) > beta::pdf(a, b, m - 1e-4));
  CHECK(beta::pdf(a, b, m) > beta::pdf(a, b, m + 1e-4));

  CHECK_THROWS_AS(beta::pdf(0.0, 1.0, 0.5), DomainError);
  CHECK_THROWS_AS(beta::cdf(1.0, -2.0, 0.5), DomainError);
  CHECK_THROWS_AS(beta::cdf(1.0, 1.0, 1.5), DomainError);

  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double c = beta::cdf(3.0, 0.7, i / 100.0);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(beta::cdf(3.0, 0.7, 0.0) == 0.0);
  CHECK(beta::cdf(3.0, 0.7, 1.0) == 1.0);
}

TEST_CASE("beta cdf derivative matches the pdf") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> param(0.5, 20.0);
  for (int trial = 0; trial < 60; ++trial) {
    const double a = param(gen), b = param(gen);
    for (int i = 1; i < 20; ++i) {
      const double x = i / 20.0;
      const double h = 1e-5;
      const double numeric = (beta::cdf(a, b, x + h) - beta::cdf(a, b, x - h)) / (2 * h);
      CHECK(std::abs(numeric - beta::pdf(a, b, x)) <= 1e-5);
    }
  }
}

TEST_CASE("beta quantile inverts the cdf") {
  for (double p : {0.025, 0.3, 0.5, 0.975}) {
    const double x = beta::quantile(2.0, 5.0, p);
    CHECK(std::abs(beta::cdf(2.0, 5.0, x) - p) < 1e-12);
  }
  const auto ci = beta_credible_interval(2.0, 2.0, 0.9);
  CHECK(std::abs(ci.lo + ci.hi - 1.0) < 1e-12);
}

TEST_CASE("fit_beta_mom: exact moments") {
  // Two-point sample with mean 0.25 and unbiased variance 0.0375.
  const double d = std::sqrt(0.0375 / 2.0);
  const auto fit = fit_beta_mom(sample_of({0.25 - d, 0.25 + d}));
  CHECK_FALSE(fit.degenerate);
  CHECK(std::abs(fit.alpha - 1.0) <= 1e-9);
  CHECK(std::abs(fit.beta - 3.0) <= 1e-9);

  const auto [a, b] = beta_from_moments(0.25, 0.0375);
  CHECK(std::abs(a - 1.0) <= 1e-12);
  CHECK(std::abs(b - 3.0) <= 1e-12);
  CHECK_THROWS_AS(beta_from_moments(0.5, 0.25), DomainError);
}

TEST_CASE("fit_beta_mom: recovers generator parameters") {
  std::mt19937_64 gen(99);
  for (double a : {0.5, 1.0, 2.0, 5.0, 15.0}) {
    for (double b : {0.5, 1.0, 2.0, 5.0, 15.0}) {
      const auto fit = fit_beta_mom(sample_of(oracle::beta_draws(gen, a, b, 100000)));
      CAPTURE(a);
      CAPTURE(b);
      CHECK_FALSE(fit.degenerate);
      CHECK(std::abs(fit.alpha - a) / a <= 0.05);
      CHECK(std::abs(fit.beta - b) / b <= 0.05);
    }
  }
}

TEST_CASE("fit_beta_mom: degenerate samples") {
  const auto constant = fit_beta_mom(sample_of(std::vector<double>(50, 0.3)));
  CHECK(constant.degenerate);
  CHECK(constant.alpha + constant.beta == doctest::Approx(kMaxConcentration));
  CHECK(constant.mean() == doctest::Approx(0.3));
  CHECK(constant.ci95 == Interval{0.3, 0.3});

  const auto all_one = fit_beta_mom(sample_of({1.0, 1.0, 1.0}));
  CHECK(all_one.degenerate);
  CHECK(all_one.alpha > 0.0);
  CHECK(all_one.beta > 0.0);

  // Unbiased variance 0.5 exceeds the Bernoulli bound 0.25.
  const auto split = fit_beta_mom(sample_of({0.0, 1.0}));
  CHECK(split.degenerate);
  CHECK(split.mean() == doctest::Approx(0.5));
  CHECK(split.alpha + split.beta == doctest::Approx(kMinConcentration));

  CHECK_THROWS_AS(fit_beta_mom(sample_of({0.5})), DomainError);
  CHECK_THROWS_AS(fit_beta_mom(sample_of({0.5, 1.2})), DomainError);
}

TEST_CASE("credible_interval") {
  CHECK(credible_interval(sample_of(std::vector<double>(20, 0.3))) == Interval{0.3, 0.3});

  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  const auto ci = credible_interval(sample_of(grid), 0.95);
  CHECK(std::abs(ci.lo - 0.025) < 1e-12);
  CHECK(std::abs(ci.hi - 0.975) < 1e-12);

  const auto half = credible_interval(sample_of({0.2, 0.4, 0.5, 0.6, 0.8}), 0.5);
  CHECK(std::abs((half.lo + half.hi) / 2.0 - 0.5) <= 1e-9);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(2 + gen() % 60);
    for (double& x : v) x = u(gen);
    double a = u(gen), b = u(gen);
    if (a > b) std::swap(a, b);
    if (a <= 0.0 || b >= 1.0 || a == b) continue;
    const auto inner = credible_interval(v, a);
    const auto outer = credible_interval(v, b);
    CHECK(outer.lo <= inner.lo);
    CHECK(inner.hi <= outer.hi);
    CHECK(inner.lo <= inner.hi);
  }
  CHECK_THROWS_AS(credible_interval(grid, 1.0), DomainError);
}

TEST_CASE("distribution_entropy") {
  CHECK(distribution_entropy(sample_of({0.31, 0.32, 0.35, 0.39})) == 0.0);
  std::vector<double> uniform;
  for (int b = 0; b < 10; ++b) {
    for (int k = 0; k < 7; ++k) uniform.push_back(b / 10.0 + 0.05);
  }
  CHECK(distribution_entropy(sample_of(uniform)) == 1.0);
  const double two = distribution_entropy(sample_of({0.12, 0.15, 0.81, 0.88}));
  CHECK(std::abs(two - 0.301029995663981195) < 1e-12);
  // Value 1.0 lands in the top bin.
  CHECK(distribution_entropy(sample_of({0.95, 1.0})) == 0.0);

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> v(2 + gen() % 100);
    const double spread = u(gen);
    const double centre = u(gen);
    for (double& x : v) x = std::clamp(centre + spread * (u(gen) - 0.5), 0.0, 1.0);
    const double h = distribution_entropy(v);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    if (trial % 100 == 0) {
      std::shuffle(v.begin(), v.end(), gen);
      CHECK(distribution_entropy(v) == h);
    }
  }
  CHECK_THROWS_AS(distribution_entropy(uniform, 1), DomainError);
}

TEST_CASE("point_entropy") {
  CHECK(point_entropy(0.5) == 1.0);
  CHECK(point_entropy(0.0) == 0.0);
  CHECK(point_entropy(1.0) == 0.0);
  CHECK(std::abs(point_entropy(0.9) - 0.468995593589281221) < 1e-12);
  CHECK(point_entropy(0.1) == doctest::Approx(point_entropy(0.9)));
  for (int i = 0; i <= 1000; ++i) {
    const double h = point_entropy(i / 1000.0);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
  }
  CHECK_THROWS_AS(point_entropy(1.5), DomainError);
}

TEST_CASE("kl_divergence") {
  const DiscreteDistribution q{{0.5, 0.5}}, p{{0.25, 0.75}};
  CHECK(kl_divergence(q, q) == 0.0);
  CHECK(std::abs(kl_divergence(q, p) - 0.143841036225890464) < 1e-12);
  CHECK_THROWS_AS(kl_divergence(DiscreteDistribution{{1.0, 0.0}}, DiscreteDistribution{{0.0, 1.0}}),
                  SupportError);
  CHECK_THROWS_AS(kl_divergence(q, DiscreteDistribution{{1.0, 0.0, 0.0}}), ShapeError);
  // Zero-mass bins of Q are skipped.
  CHECK(kl_divergence(DiscreteDistribution{{1.0, 0.0}}, p) == doctest::Approx(std::log(4.0)));

  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t bins = 2 + gen() % 20;
    DiscreteDistribution a, b;
    a.probs.resize(bins);
    b.probs.resize(bins);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < bins; ++i) {
      a.probs[i] = u(gen);
      b.probs[i] = u(gen) + 1e-3;
      sa += a.probs[i];
      sb += b.probs[i];
    }
    for (std::size_t i = 0; i < bins; ++i) {
      a.probs[i] /= sa;
      b.probs[i] /= sb;
    }
    CHECK(kl_divergence(a, b) >= 0.0);
    CHECK(kl_divergence(a, a) <= 1e-12);
    CHECK(kl_divergence(b, b) <= 1e-12);
  }
}

TEST_CASE("discretize") {
  for (double p : discretize_beta(1.0, 1.0, 4).probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  const auto sym = discretize_beta(2.0, 2.0, 2).probs;
  CHECK(std::abs(sym[0] - 0.5) < 1e-12);
  CHECK(std::abs(sym[1] - 0.5) < 1e-12);

  const auto d = discretize_beta(2.0, 5.0, 10);
  d.validate();
  CHECK(std::abs(d.probs[0] - boost::math::ibeta(2.0, 5.0, 0.1)) < 1e-12);
  for (std::size_t i = 0; i < 10; ++i) {
    const double ref = boost::math::ibeta(2.0, 5.0, (i + 1) / 10.0) -
                       boost::math::ibeta(2.0, 5.0, i / 10.0);
    CHECK(std::abs(d.probs[i] - ref) < 1e-10);
  }

  // Sharp reference around a tiny mean keeps positive far-tail mass.
  const auto sharp = discretize_beta(50.0 * 1e-4, 50.0 * (1 - 1e-4), 20);
  for (double p : sharp.probs) CHECK(p > 0.0);

  const auto s = sample_of({0.05, 0.05, 0.55, 0.95});
  const auto hist = discretize(s, 2);
  CHECK(hist.probs == std::vector<double>{0.5, 0.5});

  auto degenerate = fit_beta_mom(sample_of({0.3, 0.3, 0.3}));
  REQUIRE(degenerate.degenerate);
  const auto constant = sample_of({0.3, 0.3, 0.3});
  CHECK(discretize(degenerate, 10, &constant).probs == discretize(constant, 10).probs);
  CHECK(discretize(degenerate, 10).probs[3] == 1.0);
}

TEST_CASE("mc_sample") {
  Rng init(21);
  const auto spec = net::residual_mlp(3, 16, 1, 0.2);
  const auto params = net::init_params(spec, init);
  const std::vector<double> x{0.8, -0.5, 1.2};

  const auto plain = mc_sample(spec.with_dropout(0.0), params, x, 30, 5);
  CHECK(plain.size() == 30);
  CHECK(sample_variance(plain.values) == 0.0);
  CHECK(fit_beta_mom(plain).degenerate);

  const auto a = mc_sample(spec, params, x, 100, 5);
  const auto b = mc_sample(spec, params, x, 100, 5);
  CHECK(a == b);
  CHECK(a.seed == 5);
  CHECK(sample_variance(a.values) > 0.0);
  CHECK_FALSE(mc_sample(spec, params, x, 100, 6) == a);
  CHECK(mc_sample(spec, params, x).size() == kDefaultSampleSize);
  CHECK_THROWS_AS(mc_sample(spec, params, x, 1, 5), DomainError);
}

TEST_CASE("serialization") {
  std::mt19937_64 gen(4);
  const auto s = sample_of(oracle::beta_draws(gen, 3.0, 4.0, 100), 77);
  const auto fit = fit_beta_mom(s);
  const auto j = to_json(fit);
  CHECK(j.dump().rfind("{\"T\":100,\"alpha\":", 0) == 0);  // sorted keys
  CHECK(elicited_from_json(j) == fit);
  CHECK_THROWS_AS(elicited_from_json(nlohmann::json{{"alpha", 1.0}}), DataError);

  const auto path = std::filesystem::temp_directory_path() / "elicitd_sample_dump.txt";
  write_sample(s, path);
  const auto back = read_sample(path);
  CHECK(back.values == s.values);
  std::filesystem::remove(path);
}
