#include "elicitd/net_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "elicitd/errors.hpp"

namespace elicitd::net {

using nlohmann::json;

namespace {

json layers_to_json(const std::vector<Layer>& layers);

json layer_to_json(const Layer& layer) {
  json j;
  if (const auto* d = std::get_if<Dense>(&layer.kind)) {
    j = {{"type", "dense"}, {"in", d->in}, {"out", d->out}};
  } else if (const auto* c = std::get_if<Conv2d>(&layer.kind)) {
    j = {{"type", "conv2d"},
         {"in_channels", c->in_channels},
         {"out_channels", c->out_channels},
         {"kernel", c->kernel},
         {"stride", c->stride}};
  } else if (std::holds_alternative<Relu>(layer.kind)) {
    j = {{"type", "relu"}};
  } else if (const auto* dr = std::get_if<Dropout>(&layer.kind)) {
    j = {{"type", "dropout"}, {"rate", dr->rate}};
  } else if (const auto* r = std::get_if<Residual>(&layer.kind)) {
    j = {{"type", "residual"}, {"inner", layers_to_json(r->inner)}};
  } else if (std::holds_alternative<SigmoidHead>(layer.kind)) {
    j = {{"type", "sigmoid_head"}};
  } else if (const auto* s = std::get_if<SoftmaxHead>(&layer.kind)) {
    j = {{"type", "softmax_head"}, {"classes", s->classes}};
  }
  return j;
}

json layers_to_json(const std::vector<Layer>& layers) {
  json arr = json::array();
  for (const auto& l : layers) arr.push_back(layer_to_json(l));
  return arr;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw SchemaError(std::string("missing field '") + key + "'", key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

std::vector<Layer> layers_from_json(const json& arr);

Layer layer_from_json(const json& j) {
  const auto type = field<std::string>(j, "type");
  if (type == "dense") {
    return {Dense{field<std::size_t>(j, "in"), field<std::size_t>(j, "out")}};
  }
  if (type == "conv2d") {
    return {Conv2d{field<std::size_t>(j, "in_channels"),
                   field<std::size_t>(j, "out_channels"),
                   field<std::size_t>(j, "kernel"),
                   field_or<std::size_t>(j, "stride", 1)}};
  }
  if (type == "relu") return {Relu{}};
  if (type == "dropout") return {Dropout{field_or<double>(j, "rate", 0.2)}};
  if (type == "residual") return {Residual{layers_from_json(field<json>(j, "inner"))}};
  if (type == "sigmoid_head") return {SigmoidHead{}};
  if (type == "softmax_head") return {SoftmaxHead{field<std::size_t>(j, "classes")}};
  throw ConfigError("unknown layer type '" + type + "'");
}

std::vector<Layer> layers_from_json(const json& arr) {
  if (!arr.is_array()) throw ConfigError("layers must be an array");
  std::vector<Layer> out;
  for (const auto& j : arr) out.push_back(layer_from_json(j));
  return out;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw DataError("truncated parameter file at byte " + std::to_string(pos_));
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

json to_json(const NetworkSpec& spec) {
  return {{"input_shape", spec.input_shape}, {"layers", layers_to_json(spec.layers)}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.input_shape = field<Shape>(j, "input_shape");
  spec.layers = layers_from_json(field<json>(j, "layers"));
  spec.validate();
  return spec;
}

json to_json(const TrainConfig& cfg) {
  return {{"base_lr", cfg.base_lr},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"lr_decay_factor", cfg.lr_decay_factor},
          {"lr_decay_start_epoch", cfg.lr_decay_start_epoch},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.base_lr = field_or(j, "base_lr", cfg.base_lr);
  cfg.batch_size = field_or(j, "batch_size", cfg.batch_size);
  cfg.epochs = field_or(j, "epochs", cfg.epochs);
  cfg.lr_decay_factor = field_or(j, "lr_decay_factor", cfg.lr_decay_factor);
  cfg.lr_decay_start_epoch =
      field_or(j, "lr_decay_start_epoch", cfg.lr_decay_start_epoch);
  cfg.seed = field_or(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

std::vector<std::uint8_t> encode_params(const NetworkParams& params) {
  std::vector<std::uint8_t> out(std::begin(kParamsMagic), std::end(kParamsMagic));
  put_le<std::uint16_t>(out, kParamsVersion);
  for (const auto& t : params.tensors) {
    if (t.shape.size() > 255) throw ShapeError("tensor rank exceeds 255");
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) {
      if (d > 0xffffffffULL) throw ShapeError("tensor dimension exceeds u32");
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (double v : t.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

NetworkParams decode_params(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kParamsMagic, 4) != 0) {
    throw DataError("not an ELND parameter file");
  }
  Reader in(bytes);
  for (int i = 0; i < 4; ++i) in.get<std::uint8_t>();
  const auto version = in.get<std::uint16_t>();
  if (version != kParamsVersion) {
    throw DataError("unsupported parameter file version " + std::to_string(version));
  }
  NetworkParams params;
  while (!in.done()) {
    ParamTensor t;
    const auto rank = in.get<std::uint8_t>();
    for (std::uint8_t r = 0; r < rank; ++r) t.shape.push_back(in.get<std::uint32_t>());
    const std::size_t n = shape_size(t.shape);
    t.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.values.push_back(std::bit_cast<double>(in.get<std::uint64_t>()));
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

void save_params(const NetworkParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_params(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_params(bytes);
}

void check_params(const NetworkSpec& spec, const NetworkParams& params) {
  const NetworkParams expected = zero_params(spec);
  if (expected.tensors.size() != params.tensors.size()) {
    throw ShapeError("parameter file holds " + std::to_string(params.tensors.size()) +
                     " tensors, network needs " +
                     std::to_string(expected.tensors.size()));
  }
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (expected.tensors[i].shape != params.tensors[i].shape) {
      throw ShapeError("parameter tensor " + std::to_string(i) +
                       " does not match the network");
    }
  }
}

}  // namespace elicitd::net
