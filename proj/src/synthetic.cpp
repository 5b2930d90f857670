#include "elicitd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "elicitd/errors.hpp"
#include "elicitd/net.hpp"
#include "elicitd/random.hpp"
#include "elicitd/text.hpp"

namespace elicitd::synth {

namespace {

constexpr double kReferenceClamp = 1e-3;

std::string record_id(std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(6, std::to_string(n).size());
  std::string digits = std::to_string(i);
  return "s" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

const char* to_string(TruthFunction f) {
  switch (f) {
    case TruthFunction::kLogistic: return "logistic";
    case TruthFunction::kPiecewise: return "piecewise";
    case TruthFunction::kConstant: return "constant";
  }
  return "?";
}

TruthFunction truth_function_from_string(const std::string& name) {
  if (name == "logistic") return TruthFunction::kLogistic;
  if (name == "piecewise") return TruthFunction::kPiecewise;
  if (name == "constant" || name == "constant-p") return TruthFunction::kConstant;
  throw ConfigError("unknown ground-truth function '" + name + "'");
}

void PanelConfig::validate() const {
  if (K < 1 || K % 2 == 0) {
    throw ConfigError("panel size K must be a positive odd number, got " + std::to_string(K));
  }
  if (n < 1) throw ConfigError("record count n must be at least 1");
  if (!std::isfinite(noise) || noise < 0.0) throw ConfigError("expert noise must be >= 0");
  if (n_features < 1) throw ConfigError("n_features must be at least 1");
  if (!std::isfinite(logistic_scale)) throw ConfigError("logistic_scale must be finite");
  if (!(constant_p >= 0.0 && constant_p <= 1.0)) {
    throw ConfigError("constant_p must lie in [0, 1]");
  }
}

nlohmann::json to_json(const PanelConfig& cfg) {
  return {{"K", cfg.K},
          {"noise", cfg.noise},
          {"seed", cfg.seed},
          {"n", cfg.n},
          {"truth", to_string(cfg.truth)},
          {"n_features", cfg.n_features},
          {"logistic_scale", cfg.logistic_scale},
          {"constant_p", cfg.constant_p}};
}

PanelConfig panel_config_from_json(const nlohmann::json& j) {
  PanelConfig cfg;
  try {
    cfg.K = j.value("K", cfg.K);
    cfg.noise = j.value("noise", cfg.noise);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n = j.value("n", cfg.n);
    cfg.truth = truth_function_from_string(j.value("truth", std::string("logistic")));
    cfg.n_features = j.value("n_features", cfg.n_features);
    cfg.logistic_scale = j.value("logistic_scale", cfg.logistic_scale);
    cfg.constant_p = j.value("constant_p", cfg.constant_p);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid panel config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double truth_probability(const PanelConfig& cfg, std::span<const double> weights,
                         std::span<const double> features) {
  switch (cfg.truth) {
    case TruthFunction::kLogistic: {
      double z = 0.0;
      for (std::size_t j = 0; j < features.size(); ++j) z += weights[j] * features[j];
      return net::sigmoid(z);
    }
    case TruthFunction::kPiecewise: {
      const double x = features[0];
      if (x < -0.5) return 0.1;
      if (x > 0.5) return 0.9;
      return 0.5;
    }
    case TruthFunction::kConstant:
      return cfg.constant_p;
  }
  return cfg.constant_p;
}

Panel generate(const PanelConfig& cfg) {
  cfg.validate();
  Panel panel;

  // Index 0 holds panel-level draws; record i uses index i + 1.
  Rng shared = Rng::for_stream(cfg.seed, Stream::kSynth, 0);
  panel.expert_offsets.resize(cfg.K);
  for (double& o : panel.expert_offsets) o = shared.normal(0.0, cfg.noise);
  std::vector<double> weights(cfg.n_features);
  double norm = 0.0;
  for (double& w : weights) {
    w = shared.normal();
    norm += w * w;
  }
  norm = std::sqrt(norm);
  for (double& w : weights) w = norm > 0.0 ? w * cfg.logistic_scale / norm : 0.0;

  for (std::size_t j = 0; j < cfg.n_features; ++j) {
    panel.feature_names.push_back("x" + std::to_string(j));
  }

  panel.records.reserve(cfg.n);
  panel.truth.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng = Rng::for_stream(cfg.seed, Stream::kSynth, i + 1);
    DecisionRecord rec;
    rec.id = record_id(i, cfg.n);
    rec.features.resize(cfg.n_features);
    for (double& x : rec.features) x = rng.normal();
    const double p = truth_probability(cfg, weights, rec.features);

    int ones = 0;
    for (int e = 0; e < cfg.K; ++e) {
      const double pe = std::clamp(p + panel.expert_offsets[e], 0.0, 1.0);
      ones += rng.uniform() < pe ? 1 : 0;
    }
    rec.label = 2 * ones > cfg.K ? 1 : 0;
    rec.agreement = std::max(ones, cfg.K - ones);
    panel.truth.push_back({rec.id, p});
    panel.records.push_back(std::move(rec));
  }
  return panel;
}

void write_truth_csv(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "id,p_true\n";
  for (const auto& t : truth) out << t.id << ',' << text::format_double(t.p_true) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

GroundTruth read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "id,p_true") {
    throw SchemaError(path.string() + ": expected header id,p_true", "p_true");
  }
  GroundTruth truth;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++row;
    const auto cells = text::split_csv(line);
    const auto p = cells.size() == 2 ? text::parse_double(cells[1]) : std::nullopt;
    if (!p || *p < 0.0 || *p > 1.0) {
      throw DataError(path.string() + ": bad truth entry at row " + std::to_string(row));
    }
    truth.push_back({std::string(text::trim(cells[0])), *p});
  }
  return truth;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json j = {{"records", report.kl.size()},
                      {"mean_kl", report.mean_kl},
                      {"coverage", report.coverage},
                      {"entropy_trend", nullptr}};
  if (report.entropy_trend) j["entropy_trend"] = *report.entropy_trend;
  return j;
}

ValidationReport oracle_validate(std::span<const elicit::ElicitedDistribution> elicited,
                                 std::span<const double> p_true,
                                 std::span<const elicit::ProbabilitySample> samples,
                                 std::span<const std::optional<int>> agreement,
                                 const ValidationOptions& options) {
  if (elicited.size() != p_true.size()) {
    throw DataError("oracle_validate: " + std::to_string(elicited.size()) +
                    " elicited distributions but " + std::to_string(p_true.size()) +
                    " truth values");
  }
  if (!samples.empty() && samples.size() != elicited.size()) {
    throw DataError("oracle_validate: sample count does not match elicited count");
  }
  if (!agreement.empty() && agreement.size() != elicited.size()) {
    throw DataError("oracle_validate: agreement count does not match elicited count");
  }
  if (!(options.concentration > 0.0)) throw ConfigError("concentration must be positive");

  ValidationReport report;
  const std::size_t n = elicited.size();
  report.kl.reserve(n);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(p_true[i], kReferenceClamp, 1.0 - kReferenceClamp);
    const auto reference = elicit::discretize_beta(options.concentration * p,
                                                   options.concentration * (1.0 - p),
                                                   options.bins);
    const auto q = elicit::discretize(elicited[i], options.bins,
                                      samples.empty() ? nullptr : &samples[i]);
    report.kl.push_back(elicit::kl_divergence(q, reference));
    covered += elicited[i].ci95.contains(p_true[i]) ? 1 : 0;
  }
  if (n > 0) {
    double total = 0.0;
    for (double k : report.kl) total += k;
    report.mean_kl = total / n;
    report.coverage = static_cast<double>(covered) / n;
  }

  if (!samples.empty() && !agreement.empty() && options.K >= 7) {
    double full = 0.0, three = 0.0;
    std::size_t n_full = 0, n_three = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!agreement[i]) continue;
      const int opposing = options.K - *agreement[i];
      if (opposing == 0) {
        full += elicit::distribution_entropy(samples[i]);
        ++n_full;
      } else if (opposing == 3) {
        three += elicit::distribution_entropy(samples[i]);
        ++n_three;
      }
    }
    if (n_full > 0 && n_three > 0) report.entropy_trend = full / n_full - three / n_three;
  }
  return report;
}

}  // namespace elicitd::synth
