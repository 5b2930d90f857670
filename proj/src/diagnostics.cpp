#include "elicitd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "elicitd/errors.hpp"
#include "elicitd/text.hpp"

namespace elicitd::diag {

namespace {

constexpr std::size_t kModeBins = 20;
constexpr double kEntropyBinWidth = 1.0 / static_cast<double>(kEntropyHistogramBins);

double percent(double part, double whole) { return whole > 0.0 ? 100.0 * part / whole : 0.0; }

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string fixed2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", round2(x));
  return buf;
}

// Integral counts serialize as integers, averaged ones as reals.
nlohmann::json count_json(double x) {
  if (x == std::floor(x) && std::abs(x) < 9e15) return static_cast<long long>(x);
  return x;
}

nlohmann::json optional_json(const std::optional<double>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

void add_warning(std::vector<std::string>& warnings, const std::string& w) {
  if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
}

}  // namespace

double sample_median(std::span<const double> values) {
  if (values.empty()) throw DomainError("median of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double sample_mode(std::span<const double> values) {
  if (values.empty()) throw DomainError("mode of an empty sample");
  std::array<std::size_t, kModeBins> counts{};
  for (double v : values) ++counts[elicit::bin_index(v, kModeBins)];
  const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
  return (static_cast<double>(best) + 0.5) / static_cast<double>(kModeBins);
}

int point_prediction(const EvaluatedRecord& e, Statistic statistic) {
  e.sample.validate();
  double stat = 0.0;
  switch (statistic) {
    case Statistic::kMean: stat = elicit::sample_mean(e.sample.values); break;
    case Statistic::kMedian: stat = sample_median(e.sample.values); break;
    case Statistic::kMode: stat = sample_mode(e.sample.values); break;
  }
  return stat >= 0.5 ? 1 : 0;
}

int auc_prediction(const EvaluatedRecord& e) {
  e.sample.validate();
  std::size_t above = 0, below = 0;
  for (double v : e.sample.values) {
    above += v > 0.5 ? 1 : 0;
    below += v < 0.5 ? 1 : 0;
  }
  return above > below ? 1 : 0;
}

CiOutcome ci_correct(const elicit::Interval& ci, int label) {
  if (ci.contains(0.5)) return {true, true};
  if (ci.hi < 0.5) return {label == 0, false};
  return {label == 1, false};
}

CiOutcome ci_correct(const EvaluatedRecord& e) { return ci_correct(e.dist.ci95, e.label); }

FScore f_score(const Confusion& c) {
  FScore out;
  if (c.tp + c.fn > 0) {
    out.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    out.warnings.push_back("no positive records: sensitivity set to 0");
  }
  if (c.tn + c.fp > 0) {
    out.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  } else {
    out.warnings.push_back("no negative records: specificity set to 0");
  }
  const double denom = out.sensitivity + out.specificity;
  out.f = denom > 0.0 ? 2.0 * out.specificity * out.sensitivity / denom : 0.0;
  return out;
}

Confusion confusion(std::span<const EvaluatedRecord> records) {
  Confusion c;
  for (const auto& r : records) {
    const int predicted = point_prediction(r, Statistic::kMean);
    if (r.label == 1) {
      (predicted == 1 ? c.tp : c.fn) += 1;
    } else {
      (predicted == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

std::vector<CalibrationBin> calibration(std::span<const EvaluatedRecord> records,
                                        std::size_t bins) {
  if (bins < 1) throw ConfigError("calibration needs at least one bin");
  std::vector<CalibrationBin> out(bins);
  std::vector<double> sum_p(bins, 0.0), sum_y(bins, 0.0);
  for (const auto& r : records) {
    const double p = elicit::sample_mean(r.sample.values);
    const std::size_t b = elicit::bin_index(p, bins);
    sum_p[b] += p;
    sum_y[b] += r.label;
    out[b].count += 1.0;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = static_cast<double>(b) / static_cast<double>(bins);
    out[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
    if (out[b].count > 0.0) {
      out[b].mean_predicted = sum_p[b] / out[b].count;
      out[b].frequency = sum_y[b] / out[b].count;
    }
  }
  return out;
}

EntropyHistograms entropy_histograms(std::span<const EvaluatedRecord> records,
                                     std::size_t entropy_bins) {
  EntropyHistograms h;
  for (const auto& r : records) {
    const double e = elicit::distribution_entropy(r.sample, entropy_bins);
    const std::size_t b = elicit::bin_index(e, kEntropyHistogramBins);
    h.all[b] += 1.0;
    (ci_correct(r).correct ? h.correct : h.incorrect)[b] += 1.0;
  }
  return h;
}

std::string agreement_group_name(int opposing) {
  static const char* const kNames[] = {"Full Agreement", "One Opposing", "Two Opposing",
                                       "Three Opposing"};
  if (opposing >= 0 && opposing < 4) return kNames[opposing];
  return std::to_string(opposing) + " Opposing";
}

std::vector<AgreementRow> agreement_analysis(std::span<const EvaluatedRecord> records,
                                             int K, std::size_t entropy_bins) {
  if (K < 1) throw ConfigError("panel size must be positive");
  const int lowest = (K + 1) / 2;
  std::map<int, AgreementRow> groups;
  std::map<int, double> centered;
  for (const auto& r : records) {
    if (!r.agreement) throw SchemaError("record " + r.id + " has no agreement count", "agreement");
    const int a = *r.agreement;
    if (a < lowest || a > K) {
      throw DataError("record " + r.id + ": agreement " + std::to_string(a) + " outside [" +
                      std::to_string(lowest) + ", " + std::to_string(K) + "]");
    }
    auto& row = groups[K - a];
    row.count += 1.0;
    row.mean_entropy += elicit::distribution_entropy(r.sample, entropy_bins);
    row.mean_point_entropy += elicit::point_entropy(
        std::clamp(elicit::sample_mean(r.sample.values), 0.0, 1.0));
    centered[K - a] += r.dist.ci95.contains(0.5) ? 1.0 : 0.0;
  }
  std::vector<AgreementRow> out;
  for (auto& [opposing, row] : groups) {
    row.opposing = opposing;
    row.group = agreement_group_name(opposing);
    row.pct_records = percent(row.count, static_cast<double>(records.size()));
    row.mean_entropy /= row.count;
    row.mean_point_entropy /= row.count;
    row.pct_centered = percent(centered[opposing], row.count);
    out.push_back(row);
  }
  return out;
}

DiagnosticsReport summarize(std::span<const EvaluatedRecord> records,
                            const SummaryOptions& options) {
  if (records.empty()) throw DataError("cannot summarize an empty dataset");
  DiagnosticsReport report;
  const double n = static_cast<double>(records.size());
  report.records = n;

  double mean_ok = 0, median_ok = 0, mode_ok = 0, auc_ok = 0, ci_ok = 0, ci_centered = 0;
  std::size_t degenerate = 0;
  for (const auto& r : records) {
    mean_ok += point_prediction(r, Statistic::kMean) == r.label;
    median_ok += point_prediction(r, Statistic::kMedian) == r.label;
    mode_ok += point_prediction(r, Statistic::kMode) == r.label;
    auc_ok += auc_prediction(r) == r.label;
    const auto ci = ci_correct(r);
    ci_ok += ci.correct;
    ci_centered += ci.correct && ci.centered;
    degenerate += r.dist.degenerate ? 1 : 0;
  }
  report.acc_mean = percent(mean_ok, n);
  report.acc_median = percent(median_ok, n);
  report.acc_mode = percent(mode_ok, n);
  report.acc_auc = percent(auc_ok, n);
  report.acc_ci95 = percent(ci_ok, n);
  if (ci_ok > 0) {
    report.pct_ci_correct_centered = percent(ci_centered, ci_ok);
    report.pct_ci_correct_sided = 100.0 - report.pct_ci_correct_centered;
  } else {
    add_warning(report.warnings, "no CI-correct predictions: centered/sided split undefined");
  }

  const Confusion c = confusion(records);
  report.confusion = {static_cast<double>(c.tn), static_cast<double>(c.fp),
                      static_cast<double>(c.fn), static_cast<double>(c.tp)};
  const FScore f = f_score(c);
  report.sensitivity = f.sensitivity;
  report.specificity = f.specificity;
  report.f_score = f.f;
  for (const auto& w : f.warnings) add_warning(report.warnings, w);

  report.calibration = calibration(records, options.calibration_bins);
  report.entropy = entropy_histograms(records, options.entropy_bins);

  const bool have_agreement = std::all_of(records.begin(), records.end(),
                                          [](const auto& r) { return r.agreement.has_value(); });
  if (have_agreement || options.require_agreement) {
    report.agreement = agreement_analysis(records, options.K, options.entropy_bins);
  } else {
    add_warning(report.warnings, "agreement counts missing: agreement table skipped");
  }
  if (degenerate > 0) {
    add_warning(report.warnings, std::to_string(degenerate) + " degenerate Beta fit(s)");
  }

  report.settings = {{"entropy_bins", options.entropy_bins},
                     {"calibration_bins", options.calibration_bins},
                     {"entropy_histogram_width", kEntropyBinWidth},
                     {"mode_bins", kModeBins},
                     {"panel_size", options.K},
                     {"ci_boundary", "inclusive"}};
  return report;
}

DiagnosticsReport average_reports(std::span<const DiagnosticsReport> reports) {
  if (reports.empty()) throw DataError("no reports to average");
  const double k = static_cast<double>(reports.size());
  DiagnosticsReport out = reports.front();
  auto mean_of = [&](auto field) {
    double total = 0.0;
    for (const auto& r : reports) total += field(r);
    return total / k;
  };
  out.records = mean_of([](const auto& r) { return r.records; });
  out.acc_mean = mean_of([](const auto& r) { return r.acc_mean; });
  out.acc_median = mean_of([](const auto& r) { return r.acc_median; });
  out.acc_mode = mean_of([](const auto& r) { return r.acc_mode; });
  out.acc_auc = mean_of([](const auto& r) { return r.acc_auc; });
  out.acc_ci95 = mean_of([](const auto& r) { return r.acc_ci95; });
  out.pct_ci_correct_centered = mean_of([](const auto& r) { return r.pct_ci_correct_centered; });
  out.pct_ci_correct_sided = mean_of([](const auto& r) { return r.pct_ci_correct_sided; });
  out.sensitivity = mean_of([](const auto& r) { return r.sensitivity; });
  out.specificity = mean_of([](const auto& r) { return r.specificity; });
  out.f_score = mean_of([](const auto& r) { return r.f_score; });
  for (std::size_t i = 0; i < 4; ++i) {
    out.confusion[i] = mean_of([i](const auto& r) { return r.confusion[i]; });
  }

  for (const auto& r : reports) {
    if (r.calibration.size() != out.calibration.size()) {
      throw DataError("reports use different calibration bin counts");
    }
  }
  for (std::size_t b = 0; b < out.calibration.size(); ++b) {
    auto& bin = out.calibration[b];
    bin.count = mean_of([b](const auto& r) { return r.calibration[b].count; });
    double sp = 0.0, sf = 0.0, defined = 0.0;
    for (const auto& r : reports) {
      const auto& other = r.calibration[b];
      if (!other.mean_predicted || !other.frequency) continue;
      sp += *other.mean_predicted;
      sf += *other.frequency;
      defined += 1.0;
    }
    bin.mean_predicted = defined > 0.0 ? std::optional(sp / defined) : std::nullopt;
    bin.frequency = defined > 0.0 ? std::optional(sf / defined) : std::nullopt;
  }

  for (std::size_t b = 0; b < kEntropyHistogramBins; ++b) {
    out.entropy.all[b] = mean_of([b](const auto& r) { return r.entropy.all[b]; });
    out.entropy.correct[b] = mean_of([b](const auto& r) { return r.entropy.correct[b]; });
    out.entropy.incorrect[b] = mean_of([b](const auto& r) { return r.entropy.incorrect[b]; });
  }

  std::map<int, std::vector<const AgreementRow*>> rows;
  for (const auto& r : reports) {
    for (const auto& row : r.agreement) rows[row.opposing].push_back(&row);
  }
  out.agreement.clear();
  for (const auto& [opposing, list] : rows) {
    AgreementRow row;
    row.opposing = opposing;
    row.group = list.front()->group;
    const double m = static_cast<double>(list.size());
    for (const auto* p : list) {
      row.count += p->count / k;
      row.pct_records += p->pct_records / k;
      row.mean_entropy += p->mean_entropy;
      row.mean_point_entropy += p->mean_point_entropy;
      row.pct_centered += p->pct_centered;
    }
    row.mean_entropy /= m;
    row.mean_point_entropy /= m;
    row.pct_centered /= m;
    out.agreement.push_back(row);
  }

  out.warnings.clear();
  for (const auto& r : reports) {
    for (const auto& w : r.warnings) add_warning(out.warnings, w);
  }
  return out;
}

nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["records"] = count_json(r.records);
  j["accuracy"] = {{"mean", round2(r.acc_mean)},     {"median", round2(r.acc_median)},
                   {"mode", round2(r.acc_mode)},     {"auc", round2(r.acc_auc)},
                   {"ci95", round2(r.acc_ci95)}};
  j["ci_correct"] = {{"pct_containing_half", round2(r.pct_ci_correct_centered)},
                     {"pct_either_side", round2(r.pct_ci_correct_sided)}};
  j["f_score"] = r.f_score;
  j["sensitivity"] = r.sensitivity;
  j["specificity"] = r.specificity;
  j["confusion"] = {{"tn", count_json(r.confusion[0])}, {"fp", count_json(r.confusion[1])},
                    {"fn", count_json(r.confusion[2])}, {"tp", count_json(r.confusion[3])}};
  auto& cal = j["calibration"] = nlohmann::json::array();
  for (const auto& b : r.calibration) {
    cal.push_back({{"bin_lo", b.lo},
                   {"bin_hi", b.hi},
                   {"mean_predicted", optional_json(b.mean_predicted)},
                   {"frequency", optional_json(b.frequency)},
                   {"count", count_json(b.count)}});
  }
  auto hist = [](const auto& counts) {
    nlohmann::json a = nlohmann::json::array();
    for (double c : counts) a.push_back(count_json(c));
    return a;
  };
  j["entropy_histograms"] = {{"bin_width", kEntropyBinWidth},
                             {"all", hist(r.entropy.all)},
                             {"correct", hist(r.entropy.correct)},
                             {"incorrect", hist(r.entropy.incorrect)}};
  auto& agr = j["agreement"] = nlohmann::json::array();
  for (const auto& row : r.agreement) {
    agr.push_back({{"group", row.group},
                   {"opposing", row.opposing},
                   {"count", count_json(row.count)},
                   {"pct_records", round2(row.pct_records)},
                   {"mean_entropy", row.mean_entropy},
                   {"mean_point_entropy", row.mean_point_entropy},
                   {"pct_centered_ci", round2(row.pct_centered)}});
  }
  j["settings"] = r.settings;
  j["warnings"] = r.warnings;
  return j;
}

DiagnosticsReport report_from_json(const nlohmann::json& j) {
  DiagnosticsReport r;
  try {
    r.records = j.at("records").get<double>();
    const auto& acc = j.at("accuracy");
    r.acc_mean = acc.at("mean").get<double>();
    r.acc_median = acc.at("median").get<double>();
    r.acc_mode = acc.at("mode").get<double>();
    r.acc_auc = acc.at("auc").get<double>();
    r.acc_ci95 = acc.at("ci95").get<double>();
    r.pct_ci_correct_centered = j.at("ci_correct").at("pct_containing_half").get<double>();
    r.pct_ci_correct_sided = j.at("ci_correct").at("pct_either_side").get<double>();
    r.f_score = j.at("f_score").get<double>();
    r.sensitivity = j.at("sensitivity").get<double>();
    r.specificity = j.at("specificity").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tn").get<double>(), c.at("fp").get<double>(), c.at("fn").get<double>(),
                   c.at("tp").get<double>()};
    for (const auto& b : j.at("calibration")) {
      r.calibration.push_back({b.at("bin_lo").get<double>(), b.at("bin_hi").get<double>(),
                               optional_from(b.at("mean_predicted")),
                               optional_from(b.at("frequency")), b.at("count").get<double>()});
    }
    const auto& h = j.at("entropy_histograms");
    for (std::size_t b = 0; b < kEntropyHistogramBins; ++b) {
      r.entropy.all[b] = h.at("all").at(b).get<double>();
      r.entropy.correct[b] = h.at("correct").at(b).get<double>();
      r.entropy.incorrect[b] = h.at("incorrect").at(b).get<double>();
    }
    for (const auto& a : j.at("agreement")) {
      AgreementRow row;
      row.group = a.at("group").get<std::string>();
      row.opposing = a.at("opposing").get<int>();
      row.count = a.at("count").get<double>();
      row.pct_records = a.at("pct_records").get<double>();
      row.mean_entropy = a.at("mean_entropy").get<double>();
      row.mean_point_entropy = a.at("mean_point_entropy").get<double>();
      row.pct_centered = a.at("pct_centered_ci").get<double>();
      r.agreement.push_back(row);
    }
    r.settings = j.value("settings", nlohmann::json::object());
    r.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed diagnostics report: ") + e.what());
  }
  return r;
}

void write_report_csv(const DiagnosticsReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    const auto path = dir / "summary.csv";
    auto out = open_out(path);
    out << "metric,value\n";
    out << "records," << text::format_double(r.records) << '\n';
    out << "mean_accuracy_pct," << fixed2(r.acc_mean) << '\n';
    out << "median_accuracy_pct," << fixed2(r.acc_median) << '\n';
    out << "mode_accuracy_pct," << fixed2(r.acc_mode) << '\n';
    out << "auc_accuracy_pct," << fixed2(r.acc_auc) << '\n';
    out << "ci95_accuracy_pct," << fixed2(r.acc_ci95) << '\n';
    out << "pct_ci_correct_containing_half," << fixed2(r.pct_ci_correct_centered) << '\n';
    out << "pct_ci_correct_either_side," << fixed2(r.pct_ci_correct_sided) << '\n';
    out << "f_score," << text::format_double(r.f_score) << '\n';
    out << "sensitivity," << text::format_double(r.sensitivity) << '\n';
    out << "specificity," << text::format_double(r.specificity) << '\n';
    static const char* const kCells[] = {"tn", "fp", "fn", "tp"};
    for (std::size_t i = 0; i < 4; ++i) {
      out << kCells[i] << ',' << text::format_double(r.confusion[i]) << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = dir / "calibration.csv";
    auto out = open_out(path);
    out << "bin_lo,bin_hi,mean_predicted,frequency,count\n";
    for (const auto& b : r.calibration) {
      out << text::format_double(b.lo) << ',' << text::format_double(b.hi) << ','
          << (b.mean_predicted ? text::format_double(*b.mean_predicted) : "NA") << ','
          << (b.frequency ? text::format_double(*b.frequency) : "NA") << ','
          << text::format_double(b.count) << '\n';
    }
    finish(out, path);
  }
  const std::pair<const char*, const std::array<double, kEntropyHistogramBins>*> hists[] = {
      {"entropy_all.csv", &r.entropy.all},
      {"entropy_correct.csv", &r.entropy.correct},
      {"entropy_incorrect.csv", &r.entropy.incorrect}};
  for (const auto& [name, counts] : hists) {
    const auto path = dir / name;
    auto out = open_out(path);
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < kEntropyHistogramBins; ++b) {
      out << text::format_double(static_cast<double>(b) * kEntropyBinWidth) << ','
          << text::format_double(static_cast<double>(b + 1) * kEntropyBinWidth) << ','
          << text::format_double((*counts)[b]) << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = dir / "agreement.csv";
    auto out = open_out(path);
    out << "group,opposing,count,pct_records,mean_entropy,mean_point_entropy,pct_centered_ci\n";
    for (const auto& row : r.agreement) {
      out << row.group << ',' << row.opposing << ',' << text::format_double(row.count) << ','
          << fixed2(row.pct_records) << ',' << text::format_double(row.mean_entropy) << ','
          << text::format_double(row.mean_point_entropy) << ',' << fixed2(row.pct_centered)
          << '\n';
    }
    finish(out, path);
  }
}

void write_records_table(std::span<const EvaluatedRecord> records,
                         const std::filesystem::path& path, std::size_t entropy_bins) {
  auto out = open_out(path);
  out << "id,label,agreement,mean,median,mode,ci_lo,ci_hi,alpha,beta,degenerate,"
         "ci_correct,ci_centered,distribution_entropy,point_entropy\n";
  for (const auto& r : records) {
    const double m = elicit::sample_mean(r.sample.values);
    const auto ci = ci_correct(r);
    out << r.id << ',' << r.label << ',' << (r.agreement ? std::to_string(*r.agreement) : "")
        << ',' << text::format_double(m) << ','
        << text::format_double(sample_median(r.sample.values)) << ','
        << text::format_double(sample_mode(r.sample.values)) << ','
        << text::format_double(r.dist.ci95.lo) << ',' << text::format_double(r.dist.ci95.hi)
        << ',' << text::format_double(r.dist.alpha) << ',' << text::format_double(r.dist.beta)
        << ',' << (r.dist.degenerate ? 1 : 0) << ',' << (ci.correct ? 1 : 0) << ','
        << (ci.centered ? 1 : 0) << ','
        << text::format_double(elicit::distribution_entropy(r.sample, entropy_bins)) << ','
        << text::format_double(elicit::point_entropy(std::clamp(m, 0.0, 1.0))) << '\n';
  }
  finish(out, path);
}

}  // namespace elicitd::diag
