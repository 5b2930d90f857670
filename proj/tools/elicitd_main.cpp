#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "elicitd/pipeline.hpp"

namespace pl = elicitd::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"elicitd: elicit Beta distributions from MC-dropout classifiers"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> T;
  std::vector<std::string> records;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "top-level seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config and ELICITD_OUT)");
  app.add_option("--T", T, "Monte Carlo passes per input");
  app.add_flag("--quiet", quiet, "suppress progress output");

  auto* synth = app.add_subcommand("synth", "generate a synthetic expert-panel dataset");
  auto* train = app.add_subcommand("train", "train the network on the training split");
  auto* elicit = app.add_subcommand("elicit", "elicit a Beta distribution for one input");
  auto* evaluate = app.add_subcommand("evaluate", "elicit the test split and compute diagnostics");
  auto* report = app.add_subcommand("report", "emit plot data from an evaluation report");
  std::optional<std::string> input_id, input_file;
  elicit->add_option("--id", input_id, "record id in the configured dataset");
  elicit->add_option("--input", input_file, "input file (CSV row or image)");
  report->add_option("--record", records, "record id for a density curve")->expected(0, -1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::ostream null_stream(nullptr);
  try {
    pl::Overrides overrides;
    overrides.seed = seed;
    if (out) overrides.out = *out;
    overrides.T = T;
    overrides.quiet = quiet;
    auto cfg = pl::load_run_config(config_path ? std::optional<std::filesystem::path>(*config_path)
                                               : std::nullopt,
                                   overrides);
    if (input_id) cfg.doc["elicit"]["input_id"] = *input_id;
    if (input_file) cfg.doc["elicit"]["input_file"] = *input_file;
    for (const auto& id : records) cfg.doc["report"]["records"].push_back(id);

    std::ostream& log = quiet ? null_stream : std::cout;
    if (*synth) pl::cmd_synth(cfg, log);
    if (*train) pl::cmd_train(cfg, log);
    if (*elicit) pl::cmd_elicit(cfg, log, std::cerr);
    if (*evaluate) pl::cmd_evaluate(cfg, log, std::cerr);
    if (*report) pl::cmd_report(cfg, log);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::exit_code_for(e);
  }
  return 0;
}
