#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elicitd/record.hpp"
#include "json.hpp"

namespace elicitd::data {

enum class SourceKind { kTabular, kImageDir, kSynthetic };

const char* to_string(SourceKind kind);

// Per-feature affine map x -> (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  // Population statistics over `records`. Features whose standard deviation
  // is below 1e-12 get scale 1.
  static Standardizer fit(std::span<const DecisionRecord> records);
  void apply(std::vector<DecisionRecord>& records) const;
};

struct DatasetManifest {
  SourceKind source = SourceKind::kTabular;
  int panel_size = 7;
  std::size_t record_count = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::vector<std::size_t> input_shape;
  std::vector<std::string> feature_names;
  std::vector<std::string> dropped_features;
  // "full", "train" or "none".
  std::string normalization_scope = "full";
  Standardizer standardizer;
  double pixel_scale = 1.0;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const DatasetManifest& manifest);

struct Dataset {
  std::vector<DecisionRecord> records;
  DatasetManifest manifest;
};

struct TabularSchema {
  // Empty: every column except id, label and agreement (a column literally
  // named "agreement" is never a feature).
  std::vector<std::string> feature_columns;
  std::string label_column = "label";
  std::optional<std::string> agreement_column;
  // Used for record ids when present; otherwise ids are "row<N>".
  std::string id_column = "id";
};

struct LoadOptions {
  bool standardize = true;
  int panel_size = 7;
};

// Reads a comma-separated file with a header row. Standardizes every feature
// on the loaded set and drops constant columns.
Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema,
                     const LoadOptions& options = {});

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  // Row-major intensities in [0, 1].
  std::vector<double> pixels;

  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

GrayImage read_pgm(const std::filesystem::path& path);
GrayImage read_png(const std::filesystem::path& path);
GrayImage read_image(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

// Nearest-neighbour resampling: output pixel i takes source index
// floor((2i + 1) * src / (2 * side)).
GrayImage resize_nearest(const GrayImage& image, std::size_t side);

// Loads every image listed in `labels_csv` (columns filename,label[,agreement])
// from `dir`, resizes to side x side, and standardizes with the global pixel
// mean and standard deviation. Records are ordered by filename.
Dataset load_images(const std::filesystem::path& dir,
                    const std::filesystem::path& labels_csv, std::size_t side,
                    const LoadOptions& options = {});

struct Split {
  std::vector<DecisionRecord> train;
  std::vector<DecisionRecord> test;
};

// Seeded, label-stratified split. Each class contributes round(f * n_class)
// records to the test side; a class left empty on either side is a
// SplitError.
Split split(std::span<const DecisionRecord> records, double test_fraction,
            std::uint64_t seed);

// Writes id, feature columns, label and (when any record has one) agreement.
// Values round-trip exactly.
void write_records_csv(std::span<const DecisionRecord> records,
                       std::span<const std::string> feature_names,
                       const std::filesystem::path& path);

void check_agreement(const DecisionRecord& record, int panel_size);

}  // namespace elicitd::data
