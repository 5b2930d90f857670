#include "elicitd/datasets.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "elicitd/errors.hpp"
#include "elicitd/random.hpp"
#include "elicitd/text.hpp"

namespace elicitd::data {

using nlohmann::json;

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(const std::string& column) const {
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }

  std::size_t require(const std::string& column, const std::string& file) const {
    const auto idx = find(column);
    if (!idx) throw SchemaError("column '" + column + "' missing from " + file, column);
    return *idx;
  }
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto cells = text::split_csv(line);
    if (!have_header) {
      if (!cells.empty() && cells[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        cells[0].erase(0, 3);
      }
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    ++row;
    if (cells.size() != table.header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw DataError(path.string() + " has no header row");
  return table;
}

int parse_label(const std::string& cell, std::size_t row) {
  const auto v = text::parse_int(cell);
  if (!v || (*v != 0 && *v != 1)) {
    throw DataError("row " + std::to_string(row) + ": label '" + cell +
                    "' is not 0 or 1");
  }
  return static_cast<int>(*v);
}

int parse_agreement(const std::string& cell, std::size_t row) {
  const auto v = text::parse_int(cell);
  if (!v) {
    throw DataError("row " + std::to_string(row) + ": agreement '" + cell +
                    "' is not an integer");
  }
  return static_cast<int>(*v);
}

void count_classes(Dataset& ds) {
  ds.manifest.record_count = ds.records.size();
  ds.manifest.positives = static_cast<std::size_t>(
      std::count_if(ds.records.begin(), ds.records.end(),
                    [](const DecisionRecord& r) { return r.label == 1; }));
  ds.manifest.negatives = ds.manifest.record_count - ds.manifest.positives;
}

std::size_t nearest_index(std::size_t i, std::size_t src, std::size_t side) {
  return std::min(src - 1, (2 * i + 1) * src / (2 * side));
}

// Skips whitespace and '#' comments between PGM header tokens.
std::size_t pgm_token(std::istream& in, const std::filesystem::path& path) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  if (!(in >> v)) throw DataError("corrupt PGM header in " + path.filename().string());
  return v;
}

}  // namespace

const char* to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::kTabular: return "tabular";
    case SourceKind::kImageDir: return "image-dir";
    case SourceKind::kSynthetic: return "synthetic";
  }
  return "unknown";
}

Standardizer Standardizer::fit(std::span<const DecisionRecord> records) {
  Standardizer s;
  if (records.empty()) return s;
  const std::size_t d = records.front().features.size();
  const double n = static_cast<double>(records.size());
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& r : records) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r.features[j];
  }
  for (double& m : s.mean) m /= n;
  for (const auto& r : records) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r.features[j] - s.mean[j];
      s.scale[j] += c * c;
    }
  }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

void Standardizer::apply(std::vector<DecisionRecord>& records) const {
  for (auto& r : records) {
    if (r.features.size() != mean.size()) {
      throw ShapeError("record " + r.id + " has a different feature count");
    }
    for (std::size_t j = 0; j < mean.size(); ++j) {
      r.features[j] = (r.features[j] - mean[j]) / scale[j];
    }
  }
}

json to_json(const DatasetManifest& m) {
  return {{"source", to_string(m.source)},
          {"panel_size", m.panel_size},
          {"record_count", m.record_count},
          {"positives", m.positives},
          {"negatives", m.negatives},
          {"input_shape", m.input_shape},
          {"feature_names", m.feature_names},
          {"dropped_features", m.dropped_features},
          {"normalization",
           {{"scope", m.normalization_scope},
            {"mean", m.standardizer.mean},
            {"scale", m.standardizer.scale},
            {"pixel_scale", m.pixel_scale}}},
          {"warnings", m.warnings}};
}

void check_agreement(const DecisionRecord& record, int panel_size) {
  if (!record.agreement) return;
  const int a = *record.agreement;
  const int lo = (panel_size + 1) / 2;
  if (a < lo || a > panel_size) {
    throw DataError("record " + record.id + ": agreement " + std::to_string(a) +
                    " outside [" + std::to_string(lo) + ", " +
                    std::to_string(panel_size) + "]");
  }
}

Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema,
                     const LoadOptions& options) {
  const CsvTable table = read_csv(path);
  const std::string file = path.filename().string();
  const std::size_t label_idx = table.require(schema.label_column, file);
  std::optional<std::size_t> agreement_idx;
  if (schema.agreement_column) {
    agreement_idx = table.require(*schema.agreement_column, file);
  }
  const auto id_idx = table.find(schema.id_column);

  std::vector<std::string> names = schema.feature_columns;
  if (names.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == label_idx || (agreement_idx && c == *agreement_idx) ||
          (id_idx && c == *id_idx) || table.header[c] == "agreement") {
        continue;
      }
      names.push_back(table.header[c]);
    }
  }
  std::vector<std::size_t> feature_idx;
  for (const auto& name : names) feature_idx.push_back(table.require(name, file));

  Dataset ds;
  ds.manifest.source = SourceKind::kTabular;
  ds.manifest.panel_size = options.panel_size;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    const std::size_t row = r + 1;
    DecisionRecord rec;
    rec.id = id_idx ? cells[*id_idx] : "row" + std::to_string(row);
    rec.label = parse_label(cells[label_idx], row);
    if (agreement_idx) {
      rec.agreement = parse_agreement(cells[*agreement_idx], row);
      check_agreement(rec, options.panel_size);
    }
    for (std::size_t c : feature_idx) {
      const auto v = text::parse_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError("row " + std::to_string(row) + ": column '" +
                        table.header[c] + "' has unparseable value '" + cells[c] + "'");
      }
      rec.features.push_back(*v);
    }
    ds.records.push_back(std::move(rec));
  }

  if (options.standardize && !ds.records.empty()) {
    // Drop constant columns before fitting.
    const double n = static_cast<double>(ds.records.size());
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < names.size(); ++j) {
      double mean = 0.0, ss = 0.0;
      for (const auto& rec : ds.records) mean += rec.features[j];
      mean /= n;
      for (const auto& rec : ds.records) {
        ss += (rec.features[j] - mean) * (rec.features[j] - mean);
      }
      if (std::sqrt(ss / n) < 1e-12) {
        ds.manifest.dropped_features.push_back(names[j]);
        ds.manifest.warnings.push_back("dropped constant feature '" + names[j] + "'");
      } else {
        keep.push_back(j);
      }
    }
    if (keep.size() != names.size()) {
      std::vector<std::string> kept_names;
      for (std::size_t j : keep) kept_names.push_back(names[j]);
      names = std::move(kept_names);
      for (auto& rec : ds.records) {
        std::vector<double> kept;
        for (std::size_t j : keep) kept.push_back(rec.features[j]);
        rec.features = std::move(kept);
      }
    }
    ds.manifest.standardizer = Standardizer::fit(ds.records);
    ds.manifest.standardizer.apply(ds.records);
    ds.manifest.normalization_scope = "full";
  } else {
    ds.manifest.normalization_scope = "none";
  }
  ds.manifest.feature_names = names;
  ds.manifest.input_shape = {names.size()};
  count_classes(ds);
  return ds;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.filename().string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P2") {
    throw DataError("not a PGM image: " + path.filename().string());
  }
  GrayImage img;
  img.width = pgm_token(in, path);
  img.height = pgm_token(in, path);
  const std::size_t maxval = pgm_token(in, path);
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw DataError("corrupt PGM header in " + path.filename().string());
  }
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      throw DataError("truncated PGM data in " + path.filename().string());
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t v = bytes == 1 ? raw[i] : (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1];
      img.pixels[i] = static_cast<double>(std::min(v, maxval)) * scale;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t v = 0;
      if (!(in >> v)) throw DataError("truncated PGM data in " + path.filename().string());
      img.pixels[i] = static_cast<double>(std::min(v, maxval)) * scale;
    }
  }
  return img;
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DataError("cannot decode PNG " + path.filename().string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.filename().string() + ": " + image.message);
  }
  GrayImage img;
  img.width = image.width;
  img.height = image.height;
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = buffer[i] / 255.0;
  return img;
}

GrayImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("missing image " + path.filename().string());
  }
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return read_png(path);
  return read_pgm(path);
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.pixels) {
    out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

GrayImage resize_nearest(const GrayImage& image, std::size_t side) {
  if (side == 0) throw DomainError("resize target must be positive");
  if (image.width == side && image.height == side) return image;
  GrayImage out;
  out.width = out.height = side;
  out.pixels.resize(side * side);
  for (std::size_t r = 0; r < side; ++r) {
    const std::size_t sr = nearest_index(r, image.height, side);
    for (std::size_t c = 0; c < side; ++c) {
      out.pixels[r * side + c] = image.at(sr, nearest_index(c, image.width, side));
    }
  }
  return out;
}

Dataset load_images(const std::filesystem::path& dir,
                    const std::filesystem::path& labels_csv, std::size_t side,
                    const LoadOptions& options) {
  if (side < 8) throw ConfigError("image side must be at least 8");
  const CsvTable table = read_csv(labels_csv);
  const std::string file = labels_csv.filename().string();
  const std::size_t name_idx = table.require("filename", file);
  const std::size_t label_idx = table.require("label", file);
  const auto agreement_idx = table.find("agreement");

  std::vector<std::size_t> order(table.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.rows[a][name_idx] < table.rows[b][name_idx];
  });

  Dataset ds;
  ds.manifest.source = SourceKind::kImageDir;
  ds.manifest.panel_size = options.panel_size;
  ds.manifest.input_shape = {1, side, side};
  for (std::size_t idx : order) {
    const auto& cells = table.rows[idx];
    DecisionRecord rec;
    rec.id = cells[name_idx];
    rec.label = parse_label(cells[label_idx], idx + 1);
    if (agreement_idx && !cells[*agreement_idx].empty()) {
      rec.agreement = parse_agreement(cells[*agreement_idx], idx + 1);
      check_agreement(rec, options.panel_size);
    }
    rec.features = resize_nearest(read_image(dir / rec.id), side).pixels;
    ds.records.push_back(std::move(rec));
  }

  if (options.standardize && !ds.records.empty()) {
    // Shifted by the first pixel so a constant stack centres to exactly 0.
    const double shift = ds.records.front().features.at(0);
    double total = 0.0, count = 0.0;
    for (const auto& r : ds.records) {
      for (double v : r.features) total += v - shift;
      count += static_cast<double>(r.features.size());
    }
    const double mean = shift + total / count;
    double ss = 0.0;
    for (const auto& r : ds.records) {
      for (double v : r.features) ss += (v - mean) * (v - mean);
    }
    double sd = std::sqrt(ss / count);
    if (sd < 1e-12) {
      sd = 1.0;
      ds.manifest.warnings.push_back("constant pixel intensity; images centered only");
    }
    for (auto& r : ds.records) {
      for (double& v : r.features) v = (v - mean) / sd;
    }
    ds.manifest.standardizer.mean = {mean};
    ds.manifest.standardizer.scale = {sd};
    ds.manifest.normalization_scope = "full";
  } else {
    ds.manifest.normalization_scope = "none";
  }
  ds.manifest.pixel_scale = 1.0 / 255.0;
  count_classes(ds);
  return ds;
}

Split split(std::span<const DecisionRecord> records, double test_fraction,
            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int y = records[i].label;
    if (y != 0 && y != 1) throw DataError("record " + records[i].id + " has a non-binary label");
    by_class[y].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (int y = 0; y < 2; ++y) {
    auto& idx = by_class[y];
    if (idx.empty()) continue;
    rng.shuffle(idx.begin(), idx.end());
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    if (n_test == 0 || n_test == idx.size()) {
      throw SplitError("class " + std::to_string(y) + " with " +
                       std::to_string(idx.size()) +
                       " records cannot be split at fraction " +
                       text::format_double(test_fraction));
    }
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  if (train_idx.empty() || test_idx.empty()) throw SplitError("split left one side empty");
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  Split out;
  for (std::size_t i : train_idx) out.train.push_back(records[i]);
  for (std::size_t i : test_idx) out.test.push_back(records[i]);
  return out;
}

void write_records_csv(std::span<const DecisionRecord> records,
                       std::span<const std::string> feature_names,
                       const std::filesystem::path& path) {
  const bool with_agreement = std::any_of(records.begin(), records.end(),
                                          [](const auto& r) { return r.agreement.has_value(); });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "id";
  for (const auto& name : feature_names) out << ',' << name;
  out << ",label";
  if (with_agreement) out << ",agreement";
  out << '\n';
  for (const auto& r : records) {
    if (r.features.size() != feature_names.size()) {
      throw ShapeError("record " + r.id + " does not match the feature names");
    }
    out << r.id;
    for (double v : r.features) out << ',' << text::format_double(v);
    out << ',' << r.label;
    if (with_agreement) {
      out << ',';
      if (r.agreement) out << *r.agreement;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace elicitd::data
