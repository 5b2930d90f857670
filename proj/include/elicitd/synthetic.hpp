#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elicitd/elicitation.hpp"
#include "elicitd/record.hpp"
#include "json.hpp"

namespace elicitd::synth {

enum class TruthFunction { kLogistic, kPiecewise, kConstant };

const char* to_string(TruthFunction f);
TruthFunction truth_function_from_string(const std::string& name);

struct PanelConfig {
  int K = 7;
  // Standard deviation of each expert's persistent probability offset.
  double noise = 0.1;
  std::uint64_t seed = 0;
  std::size_t n = 1000;
  TruthFunction truth = TruthFunction::kLogistic;
  std::size_t n_features = 4;
  // Norm of the logistic weight vector.
  double logistic_scale = 3.0;
  double constant_p = 0.5;

  void validate() const;
};

nlohmann::json to_json(const PanelConfig& cfg);
PanelConfig panel_config_from_json(const nlohmann::json& j);

struct TruthEntry {
  std::string id;
  double p_true = 0.0;
  bool operator==(const TruthEntry&) const = default;
};

using GroundTruth = std::vector<TruthEntry>;

struct Panel {
  std::vector<DecisionRecord> records;
  GroundTruth truth;
  std::vector<double> expert_offsets;
  std::vector<std::string> feature_names;
};

// Features are N(0, 1). Expert e votes Bernoulli(clamp(p_true + offset_e))
// with offset_e ~ N(0, noise) drawn once per panel. Record i draws from its
// own sub-stream, so output does not depend on n beyond truncation.
Panel generate(const PanelConfig& cfg);

double truth_probability(const PanelConfig& cfg, std::span<const double> weights,
                         std::span<const double> features);

void write_truth_csv(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_truth_csv(const std::filesystem::path& path);

struct ValidationOptions {
  std::size_t bins = 20;
  double concentration = 50.0;
  int K = 7;
};

struct ValidationReport {
  std::vector<double> kl;
  double mean_kl = 0.0;
  double coverage = 0.0;
  // Mean distribution entropy of Full Agreement minus Three Opposing; absent
  // without samples and agreement counts for both groups.
  std::optional<double> entropy_trend;
};

nlohmann::json to_json(const ValidationReport& report);

// Reference for record i is Beta(c * p, c * (1 - p)) with p = p_true clamped
// to [1e-3, 1 - 1e-3]. KL is computed as KL(elicited || reference).
ValidationReport oracle_validate(std::span<const elicit::ElicitedDistribution> elicited,
                                 std::span<const double> p_true,
                                 std::span<const elicit::ProbabilitySample> samples = {},
                                 std::span<const std::optional<int>> agreement = {},
                                 const ValidationOptions& options = {});

}  // namespace elicitd::synth
