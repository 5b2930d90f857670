#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "elicitd/random.hpp"
#include "elicitd/record.hpp"

namespace elicitd::net {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

// Layer descriptors. Dense layers flatten whatever shape they receive.
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
};

// Valid (unpadded) 2-D convolution on a channels-first {C, H, W} input.
struct Conv2d {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
};

struct Relu {};

struct Dropout {
  double rate = 0.2;
};

struct SigmoidHead {};

struct SoftmaxHead {
  std::size_t classes = 2;
};

struct Layer;

// y = x + inner(x). The inner stack must preserve the shape.
struct Residual {
  std::vector<Layer> inner;
};

struct Layer {
  std::variant<Dense, Conv2d, Relu, Dropout, Residual, SigmoidHead,
               SoftmaxHead>
      kind;
};

struct NetworkSpec {
  Shape input_shape;
  std::vector<Layer> layers;

  // Checks chain compatibility, dropout rates and head placement. Returns the
  // output shape. Throws ShapeError or DomainError.
  Shape validate() const;

  // Same architecture with every dropout rate replaced by `rate`.
  NetworkSpec with_dropout(double rate) const;

  // Dropout rates in depth-first order.
  std::vector<double> dropout_rates() const;
};

// Desk-scale stand-in for a residual backbone:
//   dense(in->width), relu, dropout,
//   blocks x [residual{dense, relu, dense}, relu, dropout],
//   dense(width->1), sigmoid.
// Dropout sits after each shortcut addition.
NetworkSpec residual_mlp(std::size_t input_dim, std::size_t width,
                         std::size_t blocks, double dropout_rate);

struct ParamTensor {
  Shape shape;
  std::vector<double> values;

  bool operator==(const ParamTensor&) const = default;
};

// All trainable tensors in depth-first layer order: weight then bias for each
// dense/conv2d layer.
struct NetworkParams {
  std::vector<ParamTensor> tensors;

  std::size_t size() const;
  bool all_finite() const;
  bool operator==(const NetworkParams&) const = default;
};

NetworkParams zero_params(const NetworkSpec& spec);

// Uniform(-sqrt(6/(fan_in+fan_out)), +...) weights, zero biases.
NetworkParams init_params(const NetworkSpec& spec, Rng& rng);

enum class Mode { kTrain, kEval, kMcSample };

double sigmoid(double z);
std::vector<double> softmax(std::span<const double> z);

// Inverted-dropout mask: 0 with probability q, else 1/(1-q).
std::vector<double> dropout_mask(std::size_t n, double q, Rng& rng);

inline constexpr double kBceEpsilon = 1e-12;
double bce_loss(double p, int y);

// Probability vector produced by the output head. `rng` may be null only in
// Eval mode.
std::vector<double> forward(const NetworkSpec& spec,
                            const NetworkParams& params,
                            std::span<const double> input, Mode mode,
                            Rng* rng);

// Probability of the positive class: the sigmoid output, or component 1 of a
// softmax head.
double positive_probability(std::span<const double> head_output);

// Intermediate values of one forward pass, including the dropout masks that
// were drawn. Backward reuses them.
struct Trace {
  struct Node {
    std::vector<double> input;
    std::vector<double> mask;
    std::vector<Node> inner;
  };
  std::vector<Node> nodes;
  std::vector<double> output;
};

Trace forward_traced(const NetworkSpec& spec, const NetworkParams& params,
                     std::span<const double> input, Mode mode, Rng* rng);

// Gradient of the mean batch BCE with respect to every parameter, given the
// traces of the paired forward passes.
NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       std::span<const Trace> traces,
                       std::span<const int> labels);

struct Example {
  std::span<const double> input;
  int label = 0;
};

struct LossAndGradient {
  double mean_loss = 0.0;
  NetworkParams gradient;
};

LossAndGradient loss_and_gradient(const NetworkSpec& spec,
                                  const NetworkParams& params,
                                  std::span<const Example> batch, Mode mode,
                                  Rng* rng);

// Mean BCE over the batch in Eval mode.
double batch_loss(const NetworkSpec& spec, const NetworkParams& params,
                  std::span<const Example> batch);

// Max relative error between backward() and central differences, with all
// dropout rates forced to zero.
double grad_check(const NetworkSpec& spec, const NetworkParams& params,
                  std::span<const Example> batch, double epsilon = 1e-5);

struct TrainConfig {
  double base_lr = 1e-3;
  int lr_decay_start_epoch = 10;
  double lr_decay_factor = 0.99;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// base_lr up to lr_decay_start_epoch, then multiplied by lr_decay_factor once
// per additional epoch. `epoch` is 1-based.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> mean_loss;
  std::vector<double> learning_rate;
};

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
  std::size_t updates = 0;
};

// Mini-batch SGD on mean BCE. Pure function of (spec, dataset order, cfg).
TrainResult train(const NetworkSpec& spec,
                  std::span<const DecisionRecord> dataset,
                  const TrainConfig& cfg);

}  // namespace elicitd::net
