#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elicitd/elicitation.hpp"
#include "json.hpp"

namespace elicitd::diag {

struct EvaluatedRecord {
  std::string id;
  int label = 0;
  elicit::ProbabilitySample sample;
  elicit::ElicitedDistribution dist;
  std::optional<int> agreement;
};

enum class Statistic { kMean, kMedian, kMode };

double sample_median(std::span<const double> values);
// Midpoint of the most populated of 20 equal-width bins; ties go to the lower
// bin.
double sample_mode(std::span<const double> values);

int point_prediction(const EvaluatedRecord& e, Statistic statistic);
// Side of 0.5 holding more sample mass; values equal to 0.5 count half to
// each side and an exact tie predicts 0.
int auc_prediction(const EvaluatedRecord& e);

struct CiOutcome {
  bool correct = false;
  bool centered = false;
};

// A CI touching or containing 0.5 is correct for either label.
CiOutcome ci_correct(const elicit::Interval& ci, int label);
CiOutcome ci_correct(const EvaluatedRecord& e);

struct Confusion {
  std::size_t tn = 0, fp = 0, fn = 0, tp = 0;
  std::size_t total() const { return tn + fp + fn + tp; }
  bool operator==(const Confusion&) const = default;
};

struct FScore {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f = 0.0;
  std::vector<std::string> warnings;
};

FScore f_score(const Confusion& c);
Confusion confusion(std::span<const EvaluatedRecord> records);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  // Both undefined when the bin is empty.
  std::optional<double> mean_predicted;
  std::optional<double> frequency;
  double count = 0.0;
};

std::vector<CalibrationBin> calibration(std::span<const EvaluatedRecord> records,
                                        std::size_t bins = 10);

inline constexpr std::size_t kEntropyHistogramBins = 20;

struct EntropyHistograms {
  std::array<double, kEntropyHistogramBins> all{};
  std::array<double, kEntropyHistogramBins> correct{};
  std::array<double, kEntropyHistogramBins> incorrect{};
};

// Distribution entropy per record, binned with width 0.05 over [0, 1] and
// split by the CI rule.
EntropyHistograms entropy_histograms(std::span<const EvaluatedRecord> records,
                                     std::size_t entropy_bins = 10);

struct AgreementRow {
  int opposing = 0;
  std::string group;
  double count = 0.0;
  double pct_records = 0.0;
  double mean_entropy = 0.0;
  double mean_point_entropy = 0.0;
  double pct_centered = 0.0;
};

std::string agreement_group_name(int opposing);

// Rows for occupied groups only, ordered by opposing count.
std::vector<AgreementRow> agreement_analysis(std::span<const EvaluatedRecord> records,
                                             int K = 7, std::size_t entropy_bins = 10);

struct SummaryOptions {
  std::size_t entropy_bins = 10;
  std::size_t calibration_bins = 10;
  int K = 7;
  // Throw SchemaError instead of skipping the agreement table when a record
  // carries no agreement count.
  bool require_agreement = false;
};

struct DiagnosticsReport {
  double records = 0.0;
  double acc_mean = 0.0;
  double acc_median = 0.0;
  double acc_mode = 0.0;
  double acc_auc = 0.0;
  double acc_ci95 = 0.0;
  double pct_ci_correct_centered = 0.0;
  double pct_ci_correct_sided = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f_score = 0.0;
  std::array<double, 4> confusion{};  // tn, fp, fn, tp
  std::vector<CalibrationBin> calibration;
  EntropyHistograms entropy;
  std::vector<AgreementRow> agreement;
  nlohmann::json settings = nlohmann::json::object();
  std::vector<std::string> warnings;
};

DiagnosticsReport summarize(std::span<const EvaluatedRecord> records,
                            const SummaryOptions& options = {});

// Field-wise mean across split reports. Optional calibration values and
// agreement rows are averaged over the reports that define them.
DiagnosticsReport average_reports(std::span<const DiagnosticsReport> reports);

nlohmann::json to_json(const DiagnosticsReport& report);
DiagnosticsReport report_from_json(const nlohmann::json& j);

// summary.csv, calibration.csv, entropy_{all,correct,incorrect}.csv and
// agreement.csv under `dir`.
void write_report_csv(const DiagnosticsReport& report, const std::filesystem::path& dir);

// One row per record: id, label, agreement, sample statistics, fitted Beta,
// CI outcome and entropies.
void write_records_table(std::span<const EvaluatedRecord> records,
                         const std::filesystem::path& path, std::size_t entropy_bins = 10);

}  // namespace elicitd::diag
