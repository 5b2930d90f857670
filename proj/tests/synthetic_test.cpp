#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "elicitd/errors.hpp"
#include "elicitd/synthetic.hpp"
#include "oracles.hpp"

using namespace elicitd;
using namespace elicitd::synth;

TEST_CASE("generate: unanimity at certain truth") {
  for (double p : {0.0, 1.0}) {
    PanelConfig cfg;
    cfg.truth = TruthFunction::kConstant;
    cfg.constant_p = p;
    cfg.noise = 0.0;
    cfg.n = 200;
    const auto panel = generate(cfg);
    for (const auto& r : panel.records) {
      CHECK(r.agreement == 7);
      CHECK(r.label == static_cast<int>(p));
    }
  }
}

TEST_CASE("generate: full agreement rate at p = 0.5") {
  PanelConfig cfg;
  cfg.truth = TruthFunction::kConstant;
  cfg.constant_p = 0.5;
  cfg.noise = 0.0;
  cfg.n = 100000;
  cfg.seed = 17;
  cfg.n_features = 1;
  const auto panel = generate(cfg);
  std::size_t full = 0;
  for (const auto& r : panel.records) full += r.agreement == 7 ? 1 : 0;
  const double expected = 1.0 / 64.0;
  const double sigma = std::sqrt(expected * (1.0 - expected) / cfg.n);
  CHECK(std::abs(static_cast<double>(full) / cfg.n - expected) <= 4.0 * sigma);
}

TEST_CASE("generate: invariants and determinism") {
  for (auto truth : {TruthFunction::kLogistic, TruthFunction::kPiecewise, TruthFunction::kConstant}) {
    for (int K : {1, 3, 7, 9}) {
      PanelConfig cfg;
      cfg.truth = truth;
      cfg.K = K;
      cfg.noise = 0.2;
      cfg.n = 500;
      cfg.seed = static_cast<std::uint64_t>(K) * 31;
      const auto a = generate(cfg);
      const auto b = generate(cfg);
      CHECK(a.records == b.records);
      CHECK(a.truth == b.truth);
      REQUIRE(a.truth.size() == cfg.n);
      for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& r = a.records[i];
        REQUIRE(r.agreement.has_value());
        CHECK(*r.agreement >= (K + 1) / 2);
        CHECK(*r.agreement <= K);
        CHECK(a.truth[i].id == r.id);
        CHECK(a.truth[i].p_true >= 0.0);
        CHECK(a.truth[i].p_true <= 1.0);
      }
    }
  }

  PanelConfig small;
  small.n = 20;
  PanelConfig large = small;
  large.n = 40;
  const auto a = generate(small);
  const auto b = generate(large);
  for (std::size_t i = 0; i < small.n; ++i) CHECK(a.records[i].features == b.records[i].features);
}

TEST_CASE("generate: label is the strict majority") {
  PanelConfig cfg;
  cfg.noise = 0.0;
  cfg.truth = TruthFunction::kConstant;
  cfg.constant_p = 0.5;
  cfg.n = 2000;
  const auto panel = generate(cfg);
  for (const auto& r : panel.records) {
    // ones = agreement when the majority is 1, K - agreement otherwise.
    const int ones = r.label == 1 ? *r.agreement : cfg.K - *r.agreement;
    CHECK((2 * ones > cfg.K) == (r.label == 1));
  }
}

TEST_CASE("panel config validation") {
  PanelConfig cfg;
  cfg.K = 6;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg.K = 7;
  cfg.n = 0;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  CHECK_THROWS_AS(truth_function_from_string("cubic"), ConfigError);
  const auto back = panel_config_from_json(to_json(PanelConfig{}));
  CHECK(to_json(back) == to_json(PanelConfig{}));
}

TEST_CASE("truth CSV round trip") {
  PanelConfig cfg;
  cfg.n = 50;
  const auto panel = generate(cfg);
  const auto path = std::filesystem::temp_directory_path() / "elicitd_truth.csv";
  write_truth_csv(panel.truth, path);
  CHECK(read_truth_csv(path) == panel.truth);
  std::filesystem::remove(path);
}

TEST_CASE("oracle_validate: exact reference") {
  const std::vector<double> truth{0.1, 0.35, 0.5, 0.8, 0.97};
  std::vector<elicit::ElicitedDistribution> elicited;
  for (double p : truth) {
    elicit::ElicitedDistribution d;
    d.alpha = 50.0 * p;
    d.beta = 50.0 * (1.0 - p);
    d.ci95 = elicit::beta_credible_interval(d.alpha, d.beta);
    elicited.push_back(d);
  }
  const auto report = oracle_validate(elicited, truth);
  CHECK(report.mean_kl == 0.0);
  CHECK(report.coverage >= 0.95);
  CHECK_FALSE(report.entropy_trend.has_value());

  const std::vector<double> short_truth{0.5};
  CHECK_THROWS_AS(oracle_validate(elicited, short_truth), DataError);
}

TEST_CASE("oracle_validate: coverage of a calibrated elicitor") {
  // Known-correct sampler: posterior Beta draws after 40 Bernoulli(p) trials.
  const double p = 0.3;
  const std::size_t n = 10000, trials = 40;
  std::mt19937_64 gen(2024);
  std::bernoulli_distribution coin(p);
  std::vector<elicit::ElicitedDistribution> elicited;
  std::vector<elicit::ProbabilitySample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    int s = 0;
    for (std::size_t t = 0; t < trials; ++t) s += coin(gen) ? 1 : 0;
    elicit::ProbabilitySample sample;
    sample.values = oracle::beta_draws(gen, 1.0 + s, 1.0 + trials - s, 100);
    elicited.push_back(elicit::fit_beta_mom(sample));
    samples.push_back(std::move(sample));
  }
  const std::vector<double> truth(n, p);
  const auto report = oracle_validate(elicited, truth, samples);
  CHECK(report.coverage >= 0.90);
  CHECK(report.coverage <= 0.99);
  CHECK(report.mean_kl > 0.0);
}

TEST_CASE("oracle_validate: entropy trend sign") {
  // Narrow samples for full agreement, wide ones for three opposing.
  std::mt19937_64 gen(5);
  std::vector<elicit::ElicitedDistribution> elicited;
  std::vector<elicit::ProbabilitySample> samples;
  std::vector<std::optional<int>> agreement;
  for (int i = 0; i < 40; ++i) {
    const bool full = i % 2 == 0;
    elicit::ProbabilitySample s;
    s.values = full ? oracle::beta_draws(gen, 200, 20, 100) : oracle::beta_draws(gen, 3, 3, 100);
    elicited.push_back(elicit::fit_beta_mom(s));
    samples.push_back(std::move(s));
    agreement.push_back(full ? 7 : 4);
  }
  const std::vector<double> truth(elicited.size(), 0.6);
  const auto report = oracle_validate(elicited, truth, samples, agreement);
  REQUIRE(report.entropy_trend.has_value());
  CHECK(*report.entropy_trend < 0.0);
}
