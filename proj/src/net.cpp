#include "elicitd/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>

#include "elicitd/errors.hpp"

namespace elicitd::net {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string shape_str(const Shape& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

bool is_head(const Layer& layer) {
  return std::holds_alternative<SigmoidHead>(layer.kind) ||
         std::holds_alternative<SoftmaxHead>(layer.kind);
}

Shape conv_output_shape(const Conv2d& c, const Shape& in) {
  if (in.size() != 3) {
    throw ShapeError("conv2d expects a {C,H,W} input, got " + shape_str(in));
  }
  if (in[0] != c.in_channels) {
    throw ShapeError("conv2d expects " + std::to_string(c.in_channels) +
                     " channels, got " + std::to_string(in[0]));
  }
  if (c.kernel == 0 || c.stride == 0 || c.out_channels == 0) {
    throw ShapeError("conv2d kernel, stride and out_channels must be >= 1");
  }
  if (in[1] < c.kernel || in[2] < c.kernel) {
    throw ShapeError("conv2d kernel larger than input " + shape_str(in));
  }
  return {c.out_channels, (in[1] - c.kernel) / c.stride + 1,
          (in[2] - c.kernel) / c.stride + 1};
}

// Returns the output shape of `layers` applied to `shape`. `top_level`
// enables head checks.
Shape validate_stack(const std::vector<Layer>& layers, Shape shape,
                     bool top_level) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (is_head(layer) && (!top_level || i + 1 != layers.size())) {
      throw ShapeError("output head must be the final top-level layer");
    }
    shape = std::visit(
        Overloaded{
            [&](const Dense& d) -> Shape {
              if (d.in != shape_size(shape)) {
                throw ShapeError("dense layer expects " + std::to_string(d.in) +
                                 " inputs, got " + shape_str(shape));
              }
              if (d.out == 0) throw ShapeError("dense layer with zero outputs");
              return {d.out};
            },
            [&](const Conv2d& c) -> Shape {
              return conv_output_shape(c, shape);
            },
            [&](const Relu&) -> Shape { return shape; },
            [&](const Dropout& d) -> Shape {
              if (!(d.rate >= 0.0 && d.rate < 1.0)) {
                throw DomainError("dropout rate must lie in [0, 1), got " +
                                  std::to_string(d.rate));
              }
              return shape;
            },
            [&](const Residual& r) -> Shape {
              Shape out = validate_stack(r.inner, shape, false);
              if (out != shape) {
                throw ShapeError("residual block maps " + shape_str(shape) +
                                 " to " + shape_str(out));
              }
              return shape;
            },
            [&](const SigmoidHead&) -> Shape {
              if (shape_size(shape) != 1) {
                throw ShapeError("sigmoid head expects one logit, got " +
                                 shape_str(shape));
              }
              return {1};
            },
            [&](const SoftmaxHead& s) -> Shape {
              if (s.classes == 0 || shape_size(shape) != s.classes) {
                throw ShapeError("softmax head expects " +
                                 std::to_string(s.classes) + " logits, got " +
                                 shape_str(shape));
              }
              return {s.classes};
            },
        },
        layer.kind);
  }
  return shape;
}

void collect_rates(const std::vector<Layer>& layers, std::vector<double>& out) {
  for (const Layer& layer : layers) {
    if (const auto* d = std::get_if<Dropout>(&layer.kind)) {
      out.push_back(d->rate);
    } else if (const auto* r = std::get_if<Residual>(&layer.kind)) {
      collect_rates(r->inner, out);
    }
  }
}

void set_rates(std::vector<Layer>& layers, double rate) {
  for (Layer& layer : layers) {
    if (auto* d = std::get_if<Dropout>(&layer.kind)) {
      d->rate = rate;
    } else if (auto* r = std::get_if<Residual>(&layer.kind)) {
      set_rates(r->inner, rate);
    }
  }
}

void collect_param_shapes(const std::vector<Layer>& layers,
                          std::vector<Shape>& out) {
  for (const Layer& layer : layers) {
    std::visit(Overloaded{
                   [&](const Dense& d) {
                     out.push_back({d.out, d.in});
                     out.push_back({d.out});
                   },
                   [&](const Conv2d& c) {
                     out.push_back(
                         {c.out_channels, c.in_channels, c.kernel, c.kernel});
                     out.push_back({c.out_channels});
                   },
                   [&](const Residual& r) { collect_param_shapes(r.inner, out); },
                   [](const auto&) {},
               },
               layer.kind);
  }
}

std::size_t param_tensor_count(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const Dense&) -> std::size_t { return 2; },
                        [](const Conv2d&) -> std::size_t { return 2; },
                        [](const Residual& r) -> std::size_t {
                          std::size_t n = 0;
                          for (const Layer& l : r.inner) n += param_tensor_count(l);
                          return n;
                        },
                        [](const auto&) -> std::size_t { return 0; },
                    },
                    layer.kind);
}

void check_finite(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericsError(std::string("non-finite value in ") + where);
    }
  }
}

std::vector<double> dense_forward(const Dense& d, const ParamTensor& w,
                                  const ParamTensor& b,
                                  const std::vector<double>& x) {
  std::vector<double> y(b.values);
  for (std::size_t o = 0; o < d.out; ++o) {
    const double* row = w.values.data() + o * d.in;
    double acc = 0.0;
    for (std::size_t i = 0; i < d.in; ++i) acc += row[i] * x[i];
    y[o] += acc;
  }
  return y;
}

std::vector<double> conv_forward(const Conv2d& c, const Shape& in,
                                 const ParamTensor& w, const ParamTensor& b,
                                 const std::vector<double>& x) {
  const Shape out = conv_output_shape(c, in);
  const std::size_t h = in[1], wd = in[2], ho = out[1], wo = out[2];
  const std::size_t k = c.kernel;
  std::vector<double> y(shape_size(out));
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t r = 0; r < ho; ++r) {
      for (std::size_t col = 0; col < wo; ++col) {
        double acc = b.values[o];
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t kr = 0; kr < k; ++kr) {
            for (std::size_t kc = 0; kc < k; ++kc) {
              const std::size_t xi =
                  (ch * h + r * c.stride + kr) * wd + col * c.stride + kc;
              const std::size_t wi = ((o * c.in_channels + ch) * k + kr) * k + kc;
              acc += w.values[wi] * x[xi];
            }
          }
        }
        y[(o * ho + r) * wo + col] = acc;
      }
    }
  }
  return y;
}

class Runner {
 public:
  Runner(const NetworkParams& params, Mode mode, Rng* rng)
      : params_(params), mode_(mode), rng_(rng) {}

  std::vector<double> run(const std::vector<Layer>& layers, Shape& shape,
                          std::vector<double> x,
                          std::vector<Trace::Node>* nodes) {
    for (const Layer& layer : layers) {
      Trace::Node* node = nullptr;
      if (nodes) {
        nodes->emplace_back();
        node = &nodes->back();
        node->input = x;
      }
      x = std::visit(
          Overloaded{
              [&](const Dense& d) {
                const auto& w = params_.tensors[cursor_++];
                const auto& b = params_.tensors[cursor_++];
                shape = {d.out};
                return dense_forward(d, w, b, x);
              },
              [&](const Conv2d& c) {
                const auto& w = params_.tensors[cursor_++];
                const auto& b = params_.tensors[cursor_++];
                auto y = conv_forward(c, shape, w, b, x);
                shape = conv_output_shape(c, shape);
                return y;
              },
              [&](const Relu&) {
                for (double& v : x) v = v > 0.0 ? v : 0.0;
                return x;
              },
              [&](const Dropout& d) {
                if (mode_ == Mode::kEval) return x;
                if (rng_ == nullptr) {
                  throw DomainError("a random stream is required outside Eval mode");
                }
                auto mask = dropout_mask(x.size(), d.rate, *rng_);
                for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
                if (node) node->mask = std::move(mask);
                return x;
              },
              [&](const Residual& r) {
                Shape inner_shape = shape;
                auto y = run(r.inner, inner_shape, x, node ? &node->inner : nullptr);
                for (std::size_t i = 0; i < x.size(); ++i) y[i] += x[i];
                return y;
              },
              [&](const SigmoidHead&) {
                shape = {1};
                return std::vector<double>{sigmoid(x[0])};
              },
              [&](const SoftmaxHead& s) {
                shape = {s.classes};
                return softmax(x);
              },
          },
          layer.kind);
      check_finite(x, "forward pass");
    }
    return x;
  }

 private:
  const NetworkParams& params_;
  Mode mode_;
  Rng* rng_;
  std::size_t cursor_ = 0;
};

std::vector<Shape> input_shapes(const std::vector<Layer>& layers, Shape shape) {
  std::vector<Shape> out;
  out.reserve(layers.size());
  for (const Layer& layer : layers) {
    out.push_back(shape);
    if (!is_head(layer)) shape = validate_stack({layer}, shape, false);
  }
  return out;
}

// Backpropagates `g` (gradient at the stack output) through `layers`, whose
// first parameter tensor is at `offset`. Heads are handled by the caller.
std::vector<double> backprop(const std::vector<Layer>& layers,
                             const Shape& in_shape,
                             const std::vector<Trace::Node>& nodes,
                             const NetworkParams& params, std::size_t offset,
                             std::vector<double> g, NetworkParams& grads) {
  const auto shapes = input_shapes(layers, in_shape);
  std::vector<std::size_t> offsets(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    offsets[i] = offset;
    offset += param_tensor_count(layers[i]);
  }
  for (std::size_t idx = layers.size(); idx-- > 0;) {
    const Layer& layer = layers[idx];
    const Trace::Node& node = nodes[idx];
    const std::size_t off = offsets[idx];
    g = std::visit(
        Overloaded{
            [&](const Dense& d) {
              const auto& w = params.tensors[off].values;
              auto& gw = grads.tensors[off].values;
              auto& gb = grads.tensors[off + 1].values;
              std::vector<double> gx(d.in, 0.0);
              for (std::size_t o = 0; o < d.out; ++o) {
                const double go = g[o];
                gb[o] += go;
                if (go == 0.0) continue;
                const std::size_t row = o * d.in;
                for (std::size_t i = 0; i < d.in; ++i) {
                  gw[row + i] += go * node.input[i];
                  gx[i] += w[row + i] * go;
                }
              }
              return gx;
            },
            [&](const Conv2d& c) {
              const Shape& in = shapes[idx];
              const Shape out = conv_output_shape(c, in);
              const std::size_t h = in[1], wd = in[2], ho = out[1], wo = out[2];
              const std::size_t k = c.kernel;
              const auto& w = params.tensors[off].values;
              auto& gw = grads.tensors[off].values;
              auto& gb = grads.tensors[off + 1].values;
              std::vector<double> gx(node.input.size(), 0.0);
              for (std::size_t o = 0; o < c.out_channels; ++o) {
                for (std::size_t r = 0; r < ho; ++r) {
                  for (std::size_t col = 0; col < wo; ++col) {
                    const double go = g[(o * ho + r) * wo + col];
                    gb[o] += go;
                    for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
                      for (std::size_t kr = 0; kr < k; ++kr) {
                        for (std::size_t kc = 0; kc < k; ++kc) {
                          const std::size_t xi =
                              (ch * h + r * c.stride + kr) * wd + col * c.stride + kc;
                          const std::size_t wi =
                              ((o * c.in_channels + ch) * k + kr) * k + kc;
                          gw[wi] += go * node.input[xi];
                          gx[xi] += w[wi] * go;
                        }
                      }
                    }
                  }
                }
              }
              return gx;
            },
            [&](const Relu&) {
              for (std::size_t i = 0; i < g.size(); ++i) {
                if (!(node.input[i] > 0.0)) g[i] = 0.0;
              }
              return g;
            },
            [&](const Dropout&) {
              if (!node.mask.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= node.mask[i];
              }
              return g;
            },
            [&](const Residual& r) {
              auto inner = backprop(r.inner, shapes[idx], node.inner, params,
                                    off, g, grads);
              for (std::size_t i = 0; i < g.size(); ++i) inner[i] += g[i];
              return inner;
            },
            [&](const SigmoidHead&) -> std::vector<double> {
              throw ShapeError("output head inside a residual block");
            },
            [&](const SoftmaxHead&) -> std::vector<double> {
              throw ShapeError("output head inside a residual block");
            },
        },
        layer.kind);
  }
  return g;
}

void require_labels(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw DataError("labels must be 0 or 1, got " + std::to_string(y));
    }
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Shape NetworkSpec::validate() const {
  if (input_shape.empty() || shape_size(input_shape) == 0) {
    throw ShapeError("input shape must be non-empty");
  }
  if (layers.empty() || !is_head(layers.back())) {
    throw ShapeError("network must end with exactly one output head");
  }
  return validate_stack(layers, input_shape, true);
}

NetworkSpec NetworkSpec::with_dropout(double rate) const {
  NetworkSpec copy = *this;
  set_rates(copy.layers, rate);
  return copy;
}

std::vector<double> NetworkSpec::dropout_rates() const {
  std::vector<double> out;
  collect_rates(layers, out);
  return out;
}

NetworkSpec residual_mlp(std::size_t input_dim, std::size_t width,
                         std::size_t blocks, double dropout_rate) {
  NetworkSpec spec;
  spec.input_shape = {input_dim};
  spec.layers.push_back({Dense{input_dim, width}});
  spec.layers.push_back({Relu{}});
  spec.layers.push_back({Dropout{dropout_rate}});
  for (std::size_t b = 0; b < blocks; ++b) {
    Residual block;
    block.inner.push_back({Dense{width, width}});
    block.inner.push_back({Relu{}});
    block.inner.push_back({Dense{width, width}});
    spec.layers.push_back({std::move(block)});
    spec.layers.push_back({Relu{}});
    spec.layers.push_back({Dropout{dropout_rate}});
  }
  spec.layers.push_back({Dense{width, 1}});
  spec.layers.push_back({SigmoidHead{}});
  return spec;
}

std::size_t NetworkParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

bool NetworkParams::all_finite() const {
  for (const auto& t : tensors) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

NetworkParams zero_params(const NetworkSpec& spec) {
  spec.validate();
  std::vector<Shape> shapes;
  collect_param_shapes(spec.layers, shapes);
  NetworkParams params;
  for (auto& s : shapes) {
    const std::size_t n = shape_size(s);
    params.tensors.push_back({std::move(s), std::vector<double>(n, 0.0)});
  }
  return params;
}

NetworkParams init_params(const NetworkSpec& spec, Rng& rng) {
  NetworkParams params = zero_params(spec);
  for (auto& t : params.tensors) {
    if (t.shape.size() == 1) continue;  // bias
    std::size_t fan_in = t.shape[1], fan_out = t.shape[0];
    if (t.shape.size() == 4) {
      const std::size_t field = t.shape[2] * t.shape[3];
      fan_in *= field;
      fan_out *= field;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values) v = rng.uniform(-limit, limit);
  }
  return params;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) throw ShapeError("softmax of an empty vector");
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> dropout_mask(std::size_t n, double q, Rng& rng) {
  if (!(q >= 0.0 && q < 1.0)) {
    throw DomainError("dropout rate must lie in [0, 1), got " + std::to_string(q));
  }
  std::vector<double> mask(n, 1.0);
  if (q == 0.0) return mask;
  const double keep = 1.0 / (1.0 - q);
  for (double& m : mask) m = rng.uniform() < q ? 0.0 : keep;
  return mask;
}

double bce_loss(double p, int y) {
  const double c = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  if (y == 1) return p == 1.0 ? 0.0 : -std::log(c);
  return p == 0.0 ? 0.0 : -std::log1p(-c);
}

Trace forward_traced(const NetworkSpec& spec, const NetworkParams& params,
                     std::span<const double> input, Mode mode, Rng* rng) {
  if (input.size() != shape_size(spec.input_shape)) {
    throw ShapeError("input has " + std::to_string(input.size()) +
                     " values, network expects " +
                     std::to_string(shape_size(spec.input_shape)));
  }
  if (mode != Mode::kEval && rng == nullptr) {
    throw DomainError("a random stream is required outside Eval mode");
  }
  Trace trace;
  Shape shape = spec.input_shape;
  Runner runner(params, mode, rng);
  trace.output = runner.run(spec.layers, shape,
                            std::vector<double>(input.begin(), input.end()),
                            &trace.nodes);
  return trace;
}

std::vector<double> forward(const NetworkSpec& spec,
                            const NetworkParams& params,
                            std::span<const double> input, Mode mode,
                            Rng* rng) {
  if (input.size() != shape_size(spec.input_shape)) {
    throw ShapeError("input has " + std::to_string(input.size()) +
                     " values, network expects " +
                     std::to_string(shape_size(spec.input_shape)));
  }
  if (mode != Mode::kEval && rng == nullptr) {
    throw DomainError("a random stream is required outside Eval mode");
  }
  Shape shape = spec.input_shape;
  Runner runner(params, mode, rng);
  return runner.run(spec.layers, shape,
                    std::vector<double>(input.begin(), input.end()), nullptr);
}

double positive_probability(std::span<const double> head_output) {
  if (head_output.empty()) throw ShapeError("empty head output");
  return head_output.size() == 1 ? head_output[0] : head_output[1];
}

NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       std::span<const Trace> traces,
                       std::span<const int> labels) {
  if (traces.empty()) throw DataError("backward needs a non-empty batch");
  if (traces.size() != labels.size()) {
    throw DataError("trace and label counts differ");
  }
  require_labels(labels);
  NetworkParams grads = zero_params(spec);
  // Trunk = every layer but the head.
  const std::vector<Layer> trunk(spec.layers.begin(), spec.layers.end() - 1);
  for (std::size_t b = 0; b < traces.size(); ++b) {
    const auto& out = traces[b].output;
    // d(BCE)/d(logits) for sigmoid and softmax heads alike.
    std::vector<double> g(out);
    if (out.size() == 1) {
      g[0] -= labels[b];
    } else {
      g[static_cast<std::size_t>(labels[b])] -= 1.0;
    }
    backprop(trunk, spec.input_shape, traces[b].nodes, params, 0, std::move(g),
             grads);
  }
  const double scale = 1.0 / static_cast<double>(traces.size());
  for (auto& t : grads.tensors) {
    for (double& v : t.values) v *= scale;
  }
  if (!grads.all_finite()) throw NumericsError("non-finite gradient");
  return grads;
}

LossAndGradient loss_and_gradient(const NetworkSpec& spec,
                                  const NetworkParams& params,
                                  std::span<const Example> batch, Mode mode,
                                  Rng* rng) {
  if (batch.empty()) throw DataError("empty batch");
  std::vector<Trace> traces;
  std::vector<int> labels;
  traces.reserve(batch.size());
  labels.reserve(batch.size());
  double loss = 0.0;
  for (const Example& ex : batch) {
    traces.push_back(forward_traced(spec, params, ex.input, mode, rng));
    labels.push_back(ex.label);
    loss += bce_loss(positive_probability(traces.back().output), ex.label);
  }
  LossAndGradient out;
  out.gradient = backward(spec, params, traces, labels);
  out.mean_loss = loss / static_cast<double>(batch.size());
  return out;
}

double batch_loss(const NetworkSpec& spec, const NetworkParams& params,
                  std::span<const Example> batch) {
  if (batch.empty()) throw DataError("empty batch");
  double loss = 0.0;
  for (const Example& ex : batch) {
    const auto out = forward(spec, params, ex.input, Mode::kEval, nullptr);
    loss += bce_loss(positive_probability(out), ex.label);
  }
  return loss / static_cast<double>(batch.size());
}

double grad_check(const NetworkSpec& spec, const NetworkParams& params,
                  std::span<const Example> batch, double epsilon) {
  const NetworkSpec plain = spec.with_dropout(0.0);
  const NetworkParams analytic =
      loss_and_gradient(plain, params, batch, Mode::kEval, nullptr).gradient;
  NetworkParams probe = params;
  double worst = 0.0;
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    auto& values = probe.tensors[t].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = batch_loss(plain, probe, batch);
      values[i] = saved - epsilon;
      const double down = batch_loss(plain, probe, batch);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic.tensors[t].values[i];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

void TrainConfig::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("base_lr must be positive");
  }
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("lr_decay_factor must lie in (0, 1]");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr_decay_start_epoch < 0) {
    throw ConfigError("lr_decay_start_epoch must be >= 0");
  }
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw DomainError("epochs are 1-based");
  if (epoch <= cfg.lr_decay_start_epoch) return cfg.base_lr;
  return cfg.base_lr *
         std::pow(cfg.lr_decay_factor, epoch - cfg.lr_decay_start_epoch);
}

TrainResult train(const NetworkSpec& spec,
                  std::span<const DecisionRecord> dataset,
                  const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (dataset.empty()) throw DataError("cannot train on an empty dataset");
  const std::size_t width = shape_size(spec.input_shape);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset[i];
    if (r.label != 0 && r.label != 1) {
      throw DataError("record " + r.id + " has label " + std::to_string(r.label));
    }
    if (r.features.size() != width) {
      throw ShapeError("record " + r.id + " has " +
                       std::to_string(r.features.size()) + " features, expected " +
                       std::to_string(width));
    }
  }

  Rng init_rng(derive_seed(cfg.seed, 0));
  TrainResult result;
  result.params = init_params(spec, init_rng);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  std::vector<Example> batch;
  batch.reserve(batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    const auto e = static_cast<std::uint64_t>(epoch);
    Rng shuffle_rng(derive_seed(cfg.seed, 1, e));
    Rng mask_rng(derive_seed(cfg.seed, 2, e));
    shuffle_rng.shuffle(order.begin(), order.end());

    double total = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        batch.clear();
        for (std::size_t i = start; i < stop; ++i) {
          const auto& r = dataset[order[i]];
          batch.push_back({r.features, r.label});
        }
        auto lg = loss_and_gradient(spec, result.params, batch, Mode::kTrain,
                                    &mask_rng);
        total += lg.mean_loss * static_cast<double>(batch.size());
        for (std::size_t t = 0; t < result.params.tensors.size(); ++t) {
          auto& p = result.params.tensors[t].values;
          const auto& g = lg.gradient.tensors[t].values;
          for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
        }
        ++result.updates;
        if (!result.params.all_finite()) {
          throw NumericsError("non-finite parameter after update");
        }
      }
    } catch (const NumericsError& err) {
      throw NumericsError(std::string(err.what()) + " at epoch " +
                              std::to_string(epoch),
                          static_cast<std::size_t>(epoch));
    }
    result.history.mean_loss.push_back(total / static_cast<double>(order.size()));
    result.history.learning_rate.push_back(lr);
  }
  return result;
}

}  // namespace elicitd::net
