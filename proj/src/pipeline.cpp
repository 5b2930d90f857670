#include "elicitd/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "elicitd/beta.hpp"
#include "elicitd/errors.hpp"
#include "elicitd/net_io.hpp"
#include "elicitd/random.hpp"
#include "elicitd/synthetic.hpp"
#include "elicitd/text.hpp"

namespace elicitd::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string file_safe(std::string id) {
  for (char& c : id) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  return id;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const fs::path& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError(path.string() + ": missing column '" + name + "'", name);
  }
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  t.header = text::split_csv(line);
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    t.rows.push_back(text::split_csv(line));
    if (t.rows.back().size() != t.header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(t.rows.size()) +
                      " has the wrong number of cells");
    }
  }
  return t;
}

double cell_double(const std::string& s, const fs::path& path) {
  const auto v = text::parse_double(s);
  if (!v) throw DataError(path.string() + ": unparseable number '" + s + "'");
  return *v;
}

std::string history_csv(const net::TrainHistory& h) {
  std::string out = "epoch,lr,mean_loss\n";
  for (std::size_t e = 0; e < h.mean_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + text::format_double(h.learning_rate[e]) + "," +
           text::format_double(h.mean_loss[e]) + "\n";
  }
  return out;
}

double ci_level(const RunConfig& cfg) {
  const double level = get_or(cfg.section("evaluate"), "ci_level", 0.95);
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
  return level;
}

std::string kind_of(const RunConfig& cfg) {
  return get_or<std::string>(cfg.section("dataset"), "kind", "synthetic");
}

fs::path model_path(const RunConfig& cfg, const char* key, const char* file) {
  const auto& m = cfg.section("model");
  return m.contains(key) ? fs::path(get_or<std::string>(m, key, "")) : cfg.out / file;
}

// Loads records that were not part of the fitted dataset, mapping them onto
// its features and normalization.
data::Dataset load_external(const RunConfig& cfg, const fs::path& path,
                            const data::DatasetManifest& manifest) {
  const auto& d = cfg.section("dataset");
  data::LoadOptions raw;
  raw.standardize = false;
  raw.panel_size = manifest.panel_size;
  data::Dataset ds;
  if (kind_of(cfg) == "images") {
    ds = data::load_images(get_or<std::string>(d, "dir", ""), path,
                           get_or<std::size_t>(d, "side", 32), raw);
    if (!manifest.standardizer.mean.empty()) {
      for (auto& r : ds.records) {
        for (double& v : r.features) {
          v = (v - manifest.standardizer.mean[0]) / manifest.standardizer.scale[0];
        }
      }
    }
  } else {
    data::TabularSchema schema;
    schema.feature_columns = manifest.feature_names;
    schema.label_column = get_or<std::string>(d, "label_column", "label");
    schema.id_column = get_or<std::string>(d, "id_column", "id");
    const auto agreement = get_or<std::string>(d, "agreement_column", "");
    if (!agreement.empty()) schema.agreement_column = agreement;
    else if (kind_of(cfg) == "synthetic") schema.agreement_column = "agreement";
    ds = data::load_tabular(path, schema, raw);
    if (!manifest.standardizer.mean.empty()) manifest.standardizer.apply(ds.records);
  }
  ds.manifest.normalization_scope = manifest.normalization_scope;
  return ds;
}

std::map<std::string, double> truth_map(const RunConfig& cfg) {
  const auto& d = cfg.section("dataset");
  fs::path path;
  if (d.contains("truth")) {
    path = get_or<std::string>(d, "truth", "");
  } else if (kind_of(cfg) == "synthetic") {
    path = cfg.out / "truth.csv";
  }
  std::map<std::string, double> out;
  if (path.empty() || !fs::exists(path)) return out;
  for (const auto& t : synth::read_truth_csv(path)) out[t.id] = t.p_true;
  return out;
}

std::optional<synth::ValidationReport> validate_against_truth(
    const std::map<std::string, double>& truth, std::span<const diag::EvaluatedRecord> records,
    int K) {
  if (truth.empty()) return std::nullopt;
  std::vector<elicit::ElicitedDistribution> dists;
  std::vector<elicit::ProbabilitySample> samples;
  std::vector<std::optional<int>> agreement;
  std::vector<double> p;
  for (const auto& r : records) {
    const auto it = truth.find(r.id);
    if (it == truth.end()) return std::nullopt;
    dists.push_back(r.dist);
    samples.push_back(r.sample);
    agreement.push_back(r.agreement);
    p.push_back(it->second);
  }
  synth::ValidationOptions opts;
  opts.K = K;
  return synth::oracle_validate(dists, p, samples, agreement, opts);
}

}  // namespace

const json& RunConfig::section(const char* name) const {
  static const json kEmpty = json::object();
  if (!doc.contains(name)) return kEmpty;
  const auto& s = doc.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return s;
}

RunConfig make_run_config(const json& doc, const Overrides& overrides) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  cfg.doc = doc;
  cfg.seed = overrides.seed ? *overrides.seed : get_or<std::uint64_t>(doc, "seed", 0);
  if (overrides.out) {
    cfg.out = *overrides.out;
  } else if (doc.contains("out")) {
    cfg.out = get_or<std::string>(doc, "out", kDefaultOutDir);
  } else if (const char* env = std::getenv("ELICITD_OUT"); env && *env) {
    cfg.out = env;
  }
  cfg.T = overrides.T ? *overrides.T
                      : get_or<std::size_t>(cfg.section("elicit"), "T", elicit::kDefaultSampleSize);
  if (cfg.T < 2) throw ConfigError("T must be at least 2");
  cfg.quiet = overrides.quiet;
  return cfg;
}

RunConfig load_run_config(const std::optional<fs::path>& path, const Overrides& overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config " + path->string());
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + path->string() + ": " + e.what());
    }
  }
  return make_run_config(doc, overrides);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericsError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  return 1;
}

std::uint64_t record_seed(std::uint64_t seed, const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(seed, static_cast<std::uint64_t>(Stream::kMonteCarlo), h);
}

std::vector<diag::EvaluatedRecord> elicit_records(const net::NetworkSpec& spec,
                                                  const net::NetworkParams& params,
                                                  std::span<const DecisionRecord> records,
                                                  std::size_t T, std::uint64_t seed,
                                                  double level) {
  std::vector<diag::EvaluatedRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    diag::EvaluatedRecord e;
    e.id = r.id;
    e.label = r.label;
    e.agreement = r.agreement;
    e.sample = elicit::mc_sample(spec, params, r.features, T, record_seed(seed, r.id));
    e.dist = elicit::fit_beta_mom(e.sample);
    if (level != 0.95) e.dist.ci95 = elicit::credible_interval(e.sample, level);
    out.push_back(std::move(e));
  }
  return out;
}

data::Dataset load_dataset(const RunConfig& cfg) {
  const auto& d = cfg.section("dataset");
  const auto kind = kind_of(cfg);
  data::LoadOptions options;
  options.standardize = get_or(d, "standardize", true);
  options.panel_size = get_or(d, "panel_size", get_or(cfg.section("panel"), "K", 7));

  if (kind == "synthetic" || kind == "tabular") {
    fs::path path = kind == "synthetic" ? cfg.out / "records.csv" : fs::path{};
    if (d.contains("path")) path = get_or<std::string>(d, "path", "");
    if (path.empty()) throw ConfigError("dataset.path is required for tabular data");
    data::TabularSchema schema;
    schema.feature_columns = get_or(d, "feature_columns", std::vector<std::string>{});
    schema.label_column = get_or<std::string>(d, "label_column", "label");
    schema.id_column = get_or<std::string>(d, "id_column", "id");
    const auto agreement = get_or<std::string>(d, "agreement_column", "");
    if (!agreement.empty()) schema.agreement_column = agreement;
    else if (kind == "synthetic") schema.agreement_column = "agreement";
    auto ds = data::load_tabular(path, schema, options);
    if (kind == "synthetic") ds.manifest.source = data::SourceKind::kSynthetic;
    return ds;
  }
  if (kind == "images") {
    if (!d.contains("dir") || !d.contains("labels")) {
      throw ConfigError("image datasets need dataset.dir and dataset.labels");
    }
    return data::load_images(get_or<std::string>(d, "dir", ""),
                             get_or<std::string>(d, "labels", ""),
                             get_or<std::size_t>(d, "side", 32), options);
  }
  throw ConfigError("unknown dataset kind '" + kind + "'");
}

net::NetworkSpec build_network(const RunConfig& cfg, const data::DatasetManifest& manifest) {
  const auto& n = cfg.section("network");
  const auto type = get_or<std::string>(n, "type", "residual_mlp");
  net::NetworkSpec spec;
  if (type == "residual_mlp") {
    spec = net::residual_mlp(net::shape_size(manifest.input_shape),
                             get_or<std::size_t>(n, "width", 32),
                             get_or<std::size_t>(n, "blocks", 2), get_or(n, "dropout", 0.2));
  } else if (type == "spec") {
    if (!n.contains("spec")) throw ConfigError("network.type 'spec' needs network.spec");
    spec = net::spec_from_json(n.at("spec"));
    if (net::shape_size(spec.input_shape) != net::shape_size(manifest.input_shape)) {
      throw ShapeError("network input size does not match the dataset");
    }
  } else {
    throw ConfigError("unknown network type '" + type + "'");
  }
  spec.validate();
  return spec;
}

net::TrainConfig train_config(const RunConfig& cfg, std::size_t split_index) {
  auto tc = net::train_config_from_json(cfg.section("train"));
  tc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::kTrain), split_index);
  tc.validate();
  return tc;
}

data::Split split_dataset(const RunConfig& cfg, const data::Dataset& ds, std::size_t split_index) {
  const double f = get_or(cfg.section("split"), "test_fraction", 0.2);
  return data::split(ds.records, f,
                     derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::kSplit), split_index));
}

diag::SummaryOptions summary_options(const RunConfig& cfg) {
  const auto& e = cfg.section("evaluate");
  diag::SummaryOptions o;
  o.entropy_bins = get_or<std::size_t>(e, "entropy_bins", 10);
  o.calibration_bins = get_or<std::size_t>(e, "calibration_bins", 10);
  o.K = get_or(e, "K", get_or(cfg.section("panel"), "K", 7));
  o.require_agreement = get_or(e, "agreement", false);
  if (o.entropy_bins < 2) throw ConfigError("entropy_bins must be at least 2");
  if (o.calibration_bins < 1) throw ConfigError("calibration_bins must be at least 1");
  return o;
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  auto panel_cfg = synth::panel_config_from_json(cfg.section("panel"));
  panel_cfg.seed = cfg.seed;
  const auto panel = synth::generate(panel_cfg);

  ensure_dir(cfg.out);
  data::write_records_csv(panel.records, panel.feature_names, cfg.out / "records.csv");
  synth::write_truth_csv(panel.truth, cfg.out / "truth.csv");

  data::DatasetManifest manifest;
  manifest.source = data::SourceKind::kSynthetic;
  manifest.panel_size = panel_cfg.K;
  manifest.record_count = panel.records.size();
  for (const auto& r : panel.records) (r.label ? manifest.positives : manifest.negatives) += 1;
  manifest.input_shape = {panel_cfg.n_features};
  manifest.feature_names = panel.feature_names;
  manifest.normalization_scope = "none";
  json m = data::to_json(manifest);
  m["panel"] = synth::to_json(panel_cfg);
  m["files"] = {{"records", "records.csv"}, {"truth", "truth.csv"}};
  write_json(cfg.out / "manifest.json", m);
  log << "synth: " << panel.records.size() << " records (" << manifest.positives
      << " positive) written to " << cfg.out.string() << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto tc = train_config(cfg, 0);
  const auto ds = load_dataset(cfg);
  const auto spec = build_network(cfg, ds.manifest);
  const auto split = split_dataset(cfg, ds, 0);
  const auto result = net::train(spec, split.train, tc);

  ensure_dir(cfg.out);
  net::save_params(result.params, cfg.out / "params.bin");
  write_json(cfg.out / "network.json", net::to_json(spec));
  write_text(cfg.out / "history.csv", history_csv(result.history));
  json s = {{"test_fraction", get_or(cfg.section("split"), "test_fraction", 0.2)},
            {"train", split.train.size()},
            {"test", split.test.size()},
            {"dataset", data::to_json(ds.manifest)}};
  write_json(cfg.out / "train_summary.json", s);
  log << "train: " << tc.epochs << " epochs, " << result.updates << " updates, final loss "
      << text::format_double(result.history.mean_loss.back()) << "\n";
}

void cmd_elicit(const RunConfig& cfg, std::ostream& log, std::ostream& warn) {
  const auto& e = cfg.section("elicit");
  const auto spec = net::spec_from_json(read_json(model_path(cfg, "spec", "network.json")));
  const auto params = net::load_params(model_path(cfg, "params", "params.bin"));
  net::check_params(spec, params);
  const auto ds = load_dataset(cfg);

  std::string id;
  std::vector<double> input;
  if (e.contains("input_id")) {
    id = get_or<std::string>(e, "input_id", "");
    const auto it = std::find_if(ds.records.begin(), ds.records.end(),
                                 [&](const auto& r) { return r.id == id; });
    if (it == ds.records.end()) throw DataError("no record with id '" + id + "'");
    input = it->features;
  } else if (e.contains("input_file")) {
    const fs::path file = get_or<std::string>(e, "input_file", "");
    if (!fs::exists(file)) throw IoError("input file " + file.string() + " not found");
    id = file.stem().string();
    if (kind_of(cfg) == "images") {
      const auto side = get_or<std::size_t>(cfg.section("dataset"), "side", 32);
      input = data::resize_nearest(data::read_image(file), side).pixels;
      if (!ds.manifest.standardizer.mean.empty()) {
        for (double& v : input) {
          v = (v - ds.manifest.standardizer.mean[0]) / ds.manifest.standardizer.scale[0];
        }
      }
    } else {
      // Header row plus one row of raw feature values.
      const auto t = read_csv(file);
      if (t.rows.empty()) throw DataError(file.string() + ": no data row");
      for (const auto& name : ds.manifest.feature_names) {
        input.push_back(cell_double(t.rows[0][t.column(name, file)], file));
      }
      const auto& st = ds.manifest.standardizer;
      for (std::size_t j = 0; j < st.mean.size() && j < input.size(); ++j) {
        input[j] = (input[j] - st.mean[j]) / st.scale[j];
      }
    }
  } else {
    throw ConfigError("elicit needs elicit.input_id or elicit.input_file");
  }

  const auto seed = record_seed(cfg.seed, id);
  const auto sample = elicit::mc_sample(spec, params, input, cfg.T, seed);
  const auto dist = elicit::fit_beta_mom(sample);
  const auto dir = cfg.out / "elicit";
  ensure_dir(dir);
  json j = elicit::to_json(dist);
  j["id"] = id;
  write_json(dir / (file_safe(id) + ".json"), j);
  elicit::write_sample(sample, dir / (file_safe(id) + "_sample.txt"));
  if (dist.degenerate) {
    warn << "warning: degenerate Beta fit for " << id << " (sample variance "
         << text::format_double(dist.sample_var) << ")\n";
  }
  log << id << ": alpha " << text::format_double(dist.alpha) << ", beta "
      << text::format_double(dist.beta) << ", 95% CI [" << text::format_double(dist.ci95.lo)
      << ", " << text::format_double(dist.ci95.hi) << "]\n";
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log, std::ostream& warn) {
  const auto& e = cfg.section("evaluate");
  const auto splits = get_or<std::size_t>(e, "splits", 1);
  if (splits < 1) throw ConfigError("evaluate.splits must be at least 1");
  const double level = ci_level(cfg);
  const auto options = summary_options(cfg);
  if (splits > 1) train_config(cfg, 0);
  const auto ds = load_dataset(cfg);
  if (options.require_agreement) {
    for (const auto& r : ds.records) {
      if (!r.agreement) throw SchemaError("dataset has no agreement column", "agreement");
    }
  }
  const auto truth = truth_map(cfg);
  ensure_dir(cfg.out);

  auto settings_for = [&](const net::NetworkSpec& spec) {
    return json{{"T", cfg.T},
                {"ci_level", level},
                {"dropout_rates", spec.dropout_rates()},
                {"dropout_placement", "after residual addition"},
                {"splits", splits},
                {"seed", cfg.seed},
                {"test_fraction", get_or(cfg.section("split"), "test_fraction", 0.2)}};
  };

  std::vector<diag::DiagnosticsReport> reports;
  std::vector<synth::ValidationReport> validations;
  std::vector<diag::EvaluatedRecord> first_records;
  for (std::size_t k = 0; k < splits; ++k) {
    net::NetworkSpec spec;
    net::NetworkParams params;
    std::vector<DecisionRecord> test;
    if (splits == 1) {
      spec = net::spec_from_json(read_json(model_path(cfg, "spec", "network.json")));
      params = net::load_params(model_path(cfg, "params", "params.bin"));
      net::check_params(spec, params);
      if (e.contains("dataset")) {
        test = load_external(cfg, get_or<std::string>(e, "dataset", ""), ds.manifest).records;
      } else {
        test = split_dataset(cfg, ds, 0).test;
      }
    } else {
      spec = build_network(cfg, ds.manifest);
      const auto split = split_dataset(cfg, ds, k);
      params = net::train(spec, split.train, train_config(cfg, k)).params;
      test = split.test;
    }
    if (test.empty()) throw DataError("evaluation set is empty");

    auto records = elicit_records(spec, params, test, cfg.T, cfg.seed, level);
    auto report = diag::summarize(records, options);
    report.settings.update(settings_for(spec));
    if (auto v = validate_against_truth(truth, records, options.K)) {
      validations.push_back(*v);
    } else if (!truth.empty()) {
      warn << "warning: evaluation records lack ground truth; oracle validation skipped\n";
    }

    if (splits > 1) {
      const auto dir = cfg.out / "splits" / std::to_string(k);
      ensure_dir(dir);
      write_json(dir / "report.json", diag::to_json(report));
      diag::write_report_csv(report, dir / "tables");
      diag::write_records_table(records, dir / "records_eval.csv", options.entropy_bins);
    }
    if (k == 0) first_records = std::move(records);
    reports.push_back(std::move(report));
  }

  const auto report = diag::average_reports(reports);
  write_json(cfg.out / "report.json", diag::to_json(report));
  diag::write_report_csv(report, cfg.out / "tables");
  diag::write_records_table(first_records, cfg.out / "records_eval.csv", options.entropy_bins);

  if (validations.empty()) {
    std::error_code ec;
    fs::remove(cfg.out / "oracle.json", ec);
  } else {
    double kl = 0.0, coverage = 0.0, trend = 0.0;
    std::size_t n_trend = 0;
    for (const auto& v : validations) {
      kl += v.mean_kl;
      coverage += v.coverage;
      if (v.entropy_trend) {
        trend += *v.entropy_trend;
        ++n_trend;
      }
    }
    const double s = static_cast<double>(validations.size());
    json o = {{"mean_kl", kl / s},
              {"coverage", coverage / s},
              {"entropy_trend", n_trend ? json(trend / n_trend) : json(nullptr)},
              {"reference_concentration", synth::ValidationOptions{}.concentration},
              {"bins", synth::ValidationOptions{}.bins}};
    write_json(cfg.out / "oracle.json", o);
  }
  for (const auto& w : report.warnings) warn << "warning: " << w << "\n";
  log << "evaluate: " << text::format_double(report.records) << " records, mean accuracy "
      << text::format_double(std::round(report.acc_mean * 100) / 100) << "%, 95% CI accuracy "
      << text::format_double(std::round(report.acc_ci95 * 100) / 100) << "%, F "
      << text::format_double(report.f_score) << "\n";
}

std::vector<std::pair<double, double>> beta_density_grid(double alpha, double beta,
                                                         std::size_t points) {
  std::vector<std::pair<double, double>> out;
  out.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(points);
    out.emplace_back(x, beta::pdf(alpha, beta, x));
  }
  return out;
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
  const auto& r = cfg.section("report");
  const fs::path report_path = r.contains("input") ? fs::path(get_or<std::string>(r, "input", ""))
                                                   : cfg.out / "report.json";
  const fs::path records_path = r.contains("records_table")
                                    ? fs::path(get_or<std::string>(r, "records_table", ""))
                                    : report_path.parent_path() / "records_eval.csv";
  const auto report = diag::report_from_json(read_json(report_path));
  const auto table = read_csv(records_path);
  const auto grid = get_or<std::size_t>(r, "grid", 512);
  if (grid < 1) throw ConfigError("report.grid must be positive");

  const auto dir = cfg.out / "plots";
  ensure_dir(dir);
  std::size_t files = 0;

  const double width = 1.0 / static_cast<double>(diag::kEntropyHistogramBins);
  const std::pair<const char*, const std::array<double, diag::kEntropyHistogramBins>*> hists[] = {
      {"entropy_all.csv", &report.entropy.all},
      {"entropy_correct.csv", &report.entropy.correct},
      {"entropy_incorrect.csv", &report.entropy.incorrect}};
  for (const auto& [name, counts] : hists) {
    std::string body = "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < diag::kEntropyHistogramBins; ++b) {
      body += text::format_double(b * width) + "," + text::format_double((b + 1) * width) + "," +
              text::format_double((*counts)[b]) + "\n";
    }
    write_text(dir / name, body);
    ++files;
  }

  {
    std::string body = "bin_lo,bin_hi,mean_predicted,frequency,count\n";
    for (const auto& b : report.calibration) {
      body += text::format_double(b.lo) + "," + text::format_double(b.hi) + "," +
              (b.mean_predicted ? text::format_double(*b.mean_predicted) : "NA") + "," +
              (b.frequency ? text::format_double(*b.frequency) : "NA") + "," +
              text::format_double(b.count) + "\n";
    }
    write_text(dir / "calibration_curve.csv", body);
    ++files;
  }

  const auto c_id = table.column("id", records_path);
  const auto c_agreement = table.column("agreement", records_path);
  const auto c_entropy = table.column("distribution_entropy", records_path);
  const auto c_alpha = table.column("alpha", records_path);
  const auto c_beta = table.column("beta", records_path);
  const int K = summary_options(cfg).K;
  {
    std::string body = "group,opposing,id,distribution_entropy\n";
    for (int opposing = 0; opposing <= K; ++opposing) {
      for (const auto& row : table.rows) {
        if (row[c_agreement].empty()) continue;
        const auto a = text::parse_int(row[c_agreement]);
        if (!a || K - *a != opposing) continue;
        body += diag::agreement_group_name(opposing) + "," + std::to_string(opposing) + "," +
                row[c_id] + "," + row[c_entropy] + "\n";
      }
    }
    write_text(dir / "agreement_violin.csv", body);
    ++files;
  }

  auto write_density = [&](const std::string& name, double a, double b) {
    std::string body = "x,density\n";
    for (const auto& [x, d] : beta_density_grid(a, b, grid)) {
      body += text::format_double(x) + "," + text::format_double(d) + "\n";
    }
    write_text(dir / ("density_" + file_safe(name) + ".csv"), body);
    ++files;
  };
  for (const auto& id : get_or(r, "records", std::vector<std::string>{})) {
    const auto it = std::find_if(table.rows.begin(), table.rows.end(),
                                 [&](const auto& row) { return row[c_id] == id; });
    if (it == table.rows.end()) throw DataError("unknown record id '" + id + "'");
    write_density(id, cell_double((*it)[c_alpha], records_path),
                  cell_double((*it)[c_beta], records_path));
  }
  if (r.contains("distributions")) {
    for (const auto& d : r.at("distributions")) {
      const auto name = get_or<std::string>(d, "name", "");
      const double a = get_or(d, "alpha", 0.0), b = get_or(d, "beta", 0.0);
      if (name.empty() || !(a > 0.0) || !(b > 0.0)) {
        throw ConfigError("report.distributions entries need name, alpha > 0 and beta > 0");
      }
      write_density(name, a, b);
    }
  }
  log << "report: " << files << " plot-data files written to " << dir.string() << "\n";
}

}  // namespace elicitd::pipeline
