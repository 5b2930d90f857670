#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "elicitd/datasets.hpp"
#include "elicitd/diagnostics.hpp"
#include "elicitd/net.hpp"
#include "json.hpp"

namespace elicitd::pipeline {

inline constexpr const char* kDefaultOutDir = "elicitd_out";

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> T;
  bool quiet = false;
};

// Parsed run configuration. `doc` keeps the full JSON document; typed fields
// hold the values every subcommand needs.
struct RunConfig {
  nlohmann::json doc = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::filesystem::path out = kDefaultOutDir;
  std::size_t T = elicit::kDefaultSampleSize;
  bool quiet = false;

  const nlohmann::json& section(const char* name) const;
};

// Precedence: flags, then the config file, then ELICITD_OUT (output
// directory only), then defaults.
RunConfig make_run_config(const nlohmann::json& doc, const Overrides& overrides = {});
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const Overrides& overrides = {});

// 0 for success; 1 configuration, schema or data errors; 2 IO failures;
// 3 numeric failures.
int exit_code_for(const std::exception& e);

// Stable per-record Monte Carlo seed: derived from the top-level seed and a
// hash of the record id, so single-record and batch elicitation agree.
std::uint64_t record_seed(std::uint64_t seed, const std::string& id);

std::vector<diag::EvaluatedRecord> elicit_records(const net::NetworkSpec& spec,
                                                  const net::NetworkParams& params,
                                                  std::span<const DecisionRecord> records,
                                                  std::size_t T, std::uint64_t seed,
                                                  double ci_level = 0.95);

data::Dataset load_dataset(const RunConfig& cfg);
net::NetworkSpec build_network(const RunConfig& cfg, const data::DatasetManifest& manifest);
net::TrainConfig train_config(const RunConfig& cfg, std::size_t split_index = 0);
data::Split split_dataset(const RunConfig& cfg, const data::Dataset& ds,
                          std::size_t split_index = 0);
diag::SummaryOptions summary_options(const RunConfig& cfg);

void cmd_synth(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_elicit(const RunConfig& cfg, std::ostream& log, std::ostream& warn);
void cmd_evaluate(const RunConfig& cfg, std::ostream& log, std::ostream& warn);
void cmd_report(const RunConfig& cfg, std::ostream& log);

// Beta density at x = (i + 0.5) / points, i = 0..points-1.
std::vector<std::pair<double, double>> beta_density_grid(double alpha, double beta,
                                                         std::size_t points = 512);

}  // namespace elicitd::pipeline
