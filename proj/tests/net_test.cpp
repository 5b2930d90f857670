#include <cmath>
#include <numeric>

#include "doctest.h"
#include "elicitd/errors.hpp"
#include "elicitd/net.hpp"
#include "elicitd/net_io.hpp"
#include "test_util.hpp"

using namespace elicitd;
using namespace elicitd::net;

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  for (double z : {0.1, 1.0, 3.7, 20.0}) {
    CHECK(sigmoid(z) + sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-15));
  }
  // 1/(1+e^-2), evaluated at 30 digits.
  CHECK(std::abs(sigmoid(2.0) - 0.880797077977882444) < 1e-15);
  CHECK(std::isfinite(sigmoid(800.0)));
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(-800.0) >= 0.0);
  double prev = 0.0;
  for (double z = -30.0; z <= 30.0; z += 0.5) {
    CHECK(sigmoid(z) > prev);
    prev = sigmoid(z);
  }
}

TEST_CASE("softmax") {
  const std::vector<double> equal{4.2, 4.2, 4.2};
  for (double p : softmax(equal)) CHECK(p == doctest::Approx(1.0 / 3.0));
  const std::vector<double> single{-7.0};
  CHECK(softmax(single)[0] == 1.0);
  const std::vector<double> logs{std::log(1.0), std::log(2.0), std::log(3.0)};
  const auto p = softmax(logs);
  CHECK(std::abs(p[0] - 1.0 / 6.0) < 1e-15);
  CHECK(std::abs(p[1] - 2.0 / 6.0) < 1e-15);
  CHECK(std::abs(p[2] - 3.0 / 6.0) < 1e-15);
  CHECK_THROWS_AS(softmax(std::vector<double>{}), ShapeError);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(1 + rng.below(6));
    for (double& v : z) v = rng.uniform(-20, 20);
    const double c = rng.uniform(-10, 10);
    std::vector<double> shifted(z);
    for (double& v : shifted) v += c;
    const auto a = softmax(z), b = softmax(shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) <= 1e-12);
      CHECK(a[i] > 0.0);
      total += a[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("dropout_mask") {
  Rng rng(3);
  for (double m : dropout_mask(50, 0.0, rng)) CHECK(m == 1.0);
  const auto mask = dropout_mask(100000, 0.5, rng);
  for (double m : mask) CHECK((m == 0.0 || m == 2.0));
  const double mean = std::accumulate(mask.begin(), mask.end(), 0.0) / mask.size();
  CHECK(mean >= 0.99);
  CHECK(mean <= 1.01);
  CHECK_THROWS_AS(dropout_mask(4, 1.0, rng), DomainError);
  CHECK_THROWS_AS(dropout_mask(4, -0.1, rng), DomainError);
}

TEST_CASE("bce_loss") {
  CHECK(bce_loss(1.0, 1) == 0.0);
  CHECK(bce_loss(0.0, 0) == 0.0);
  CHECK(std::abs(bce_loss(0.5, 0) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(bce_loss(0.9, 0) - 2.302585092994045684) < 1e-12);
  CHECK(std::isfinite(bce_loss(0.0, 1)));
  CHECK(bce_loss(0.3, 1) > 0.0);
}

TEST_CASE("spec validation") {
  NetworkSpec ok = residual_mlp(3, 4, 2, 0.2);
  CHECK(ok.validate() == Shape{1});
  CHECK(ok.dropout_rates() == std::vector<double>{0.2, 0.2, 0.2});

  NetworkSpec chain{{3}, {{Dense{4, 1}}, {SigmoidHead{}}}};
  CHECK_THROWS_AS(chain.validate(), ShapeError);

  NetworkSpec rate{{3}, {{Dense{3, 1}}, {Dropout{1.0}}, {SigmoidHead{}}}};
  CHECK_THROWS_AS(rate.validate(), DomainError);

  NetworkSpec resid{{3}, {{Residual{{{Dense{3, 2}}}}}, {Dense{3, 1}}, {SigmoidHead{}}}};
  CHECK_THROWS_AS(resid.validate(), ShapeError);

  NetworkSpec no_head{{3}, {{Dense{3, 1}}}};
  CHECK_THROWS_AS(no_head.validate(), ShapeError);

  NetworkSpec two_heads{{1}, {{SigmoidHead{}}, {SigmoidHead{}}}};
  CHECK_THROWS_AS(two_heads.validate(), ShapeError);

  NetworkSpec conv{{1, 4, 4}, {{Conv2d{1, 2, 2, 2}}, {Relu{}}, {Dense{8, 1}}, {SigmoidHead{}}}};
  CHECK(conv.validate() == Shape{1});
}

TEST_CASE("forward: residual block with zero inner weights is the identity") {
  NetworkSpec spec{{3},
                   {{Residual{{{Dense{3, 3}}, {Relu{}}, {Dense{3, 3}}}}},
                    {Dense{3, 1}},
                    {SigmoidHead{}}}};
  NetworkSpec bare{{3}, {{Dense{3, 1}}, {SigmoidHead{}}}};
  Rng rng(5);
  NetworkParams params = init_params(spec, rng);
  for (std::size_t t = 0; t < 4; ++t) {
    for (double& v : params.tensors[t].values) v = 0.0;
  }
  NetworkParams bare_params{{params.tensors[4], params.tensors[5]}};
  const std::vector<double> x{0.3, -1.2, 2.5};
  CHECK(forward(spec, params, x, Mode::kEval, nullptr) ==
        forward(bare, bare_params, x, Mode::kEval, nullptr));

  auto trace = forward_traced(spec, params, x, Mode::kEval, nullptr);
  // Input to the dense layer after the block equals the block input.
  CHECK(trace.nodes[1].input == x);
}

TEST_CASE("forward: dropout modes") {
  Rng init(1);
  const NetworkSpec zero_q = residual_mlp(4, 16, 2, 0.0);
  const NetworkParams params = init_params(zero_q, init);
  const std::vector<double> x{0.5, -0.25, 1.0, 2.0};
  const auto eval = forward(zero_q, params, x, Mode::kEval, nullptr);
  REQUIRE(eval[0] != 0.5);
  Rng rng(9);
  CHECK(forward(zero_q, params, x, Mode::kTrain, &rng) == eval);
  CHECK(forward(zero_q, params, x, Mode::kMcSample, &rng) == eval);

  const NetworkSpec half = zero_q.with_dropout(0.5);
  Rng stream(42);
  const auto first = forward(half, params, x, Mode::kMcSample, &stream);
  const auto second = forward(half, params, x, Mode::kMcSample, &stream);
  CHECK(first != second);
  CHECK(forward(half, params, x, Mode::kEval, nullptr) == eval);

  CHECK_THROWS_AS(forward(half, params, x, Mode::kMcSample, nullptr), DomainError);
  CHECK_THROWS_AS(forward(half, params, std::vector<double>{1.0}, Mode::kEval, nullptr),
                  ShapeError);
}

TEST_CASE("forward: heads and numerics") {
  NetworkSpec spec{{3}, {{Dense{3, 4}}, {SoftmaxHead{4}}}};
  Rng rng(2);
  auto params = init_params(spec, rng);
  const auto out = forward(spec, params, std::vector<double>{1, 2, 3}, Mode::kEval, nullptr);
  CHECK(std::abs(std::accumulate(out.begin(), out.end(), 0.0) - 1.0) < 1e-9);

  params.tensors[0].values.assign(params.tensors[0].values.size(), 1e308);
  CHECK_THROWS_AS(forward(spec, params, std::vector<double>{10, 10, 10}, Mode::kEval, nullptr),
                  NumericsError);
}

TEST_CASE("dropout keeps the linear output unbiased") {
  // Mean of the pre-head logit over MC passes converges to the Eval logit.
  const std::vector<double> x{0.7, -0.4, 1.3, 0.2, -0.9, 0.5};
  for (int k = 1; k <= 9; ++k) {
    const double q = 0.1 * k;
    NetworkSpec spec{{6}, {{Dropout{q}}, {Dense{6, 1}}, {SigmoidHead{}}}};
    Rng init(100 + k);
    const auto params = init_params(spec, init);
    const double eval_logit =
        forward_traced(spec, params, x, Mode::kEval, nullptr).nodes.back().input[0];
    Rng rng(7 + k);
    const int n = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z =
          forward_traced(spec, params, x, Mode::kMcSample, &rng).nodes.back().input[0];
      sum += z;
      sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1);
    const double se = std::sqrt(var / n);
    CHECK(std::abs(mean - eval_logit) <= 5.0 * se);
  }
}

TEST_CASE("backward: symmetric cancellation and duplication") {
  NetworkSpec spec{{2}, {{Dense{2, 1}}, {SigmoidHead{}}}};
  const NetworkParams zero = zero_params(spec);
  const std::vector<double> x{0.4, -1.1};
  std::vector<Example> balanced{{x, 0}, {x, 1}};
  auto lg = loss_and_gradient(spec, zero, balanced, Mode::kEval, nullptr);
  CHECK(lg.gradient.tensors[1].values[0] == 0.0);

  Rng rng(4);
  NetworkSpec deep = residual_mlp(2, 3, 1, 0.0);
  const auto params = init_params(deep, rng);
  std::vector<Example> one{{x, 1}};
  std::vector<Example> many(5, Example{x, 1});
  const auto g1 = loss_and_gradient(deep, params, one, Mode::kEval, nullptr).gradient;
  const auto g5 = loss_and_gradient(deep, params, many, Mode::kEval, nullptr).gradient;
  for (std::size_t t = 0; t < g1.tensors.size(); ++t) {
    for (std::size_t i = 0; i < g1.tensors[t].values.size(); ++i) {
      CHECK(g5.tensors[t].values[i] == doctest::Approx(g1.tensors[t].values[i]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(loss_and_gradient(deep, params, std::vector<Example>{}, Mode::kEval, nullptr),
                  DataError);
}

TEST_CASE("backward reuses the forward pass masks") {
  // Gradient from a Train-mode pass equals the gradient of a network whose
  // dropout layer is replaced by the fixed mask that pass drew.
  const std::vector<double> x{0.9, -0.3, 0.4, 1.5};
  NetworkSpec spec{{4}, {{Dense{4, 5}}, {Dropout{0.5}}, {Dense{5, 1}}, {SigmoidHead{}}}};
  Rng init(8);
  const auto params = init_params(spec, init);
  Rng rng(77);
  const Trace trace = forward_traced(spec, params, x, Mode::kTrain, &rng);
  const auto& mask = trace.nodes[1].mask;
  REQUIRE(mask.size() == 5);
  const std::vector<int> labels{1};
  const auto grad = backward(spec, params, std::span<const Trace>(&trace, 1), labels);

  // Fold the mask into the second dense layer's weights.
  NetworkSpec folded{{4}, {{Dense{4, 5}}, {Dense{5, 1}}, {SigmoidHead{}}}};
  NetworkParams fp = params;
  for (std::size_t i = 0; i < 5; ++i) fp.tensors[2].values[i] *= mask[i];
  std::vector<Example> batch{{x, 1}};
  const auto ref = loss_and_gradient(folded, fp, batch, Mode::kEval, nullptr).gradient;
  for (std::size_t i = 0; i < grad.tensors[1].values.size(); ++i) {
    CHECK(grad.tensors[1].values[i] == doctest::Approx(ref.tensors[1].values[i]).epsilon(1e-12));
  }
}

TEST_CASE("grad_check") {
  Rng rng(2024);
  SUBCASE("linear network") {
    NetworkSpec spec{{3}, {{Dense{3, 4}}, {Dense{4, 1}}, {SigmoidHead{}}}};
    const auto params = init_params(spec, rng);
    const auto data = testutil::random_batch(rng, 3, 6);
    CHECK(grad_check(spec, params, testutil::as_examples(data)) <= 1e-7);
  }
  SUBCASE("two hidden relu layers") {
    NetworkSpec spec{{3},
                     {{Dense{3, 5}}, {Relu{}}, {Dense{5, 4}}, {Relu{}}, {Dense{4, 1}}, {SigmoidHead{}}}};
    const auto [params, data] = testutil::away_from_kinks(spec, rng, 6);
    CHECK(grad_check(spec, params, testutil::as_examples(data)) <= 1e-4);
  }
  SUBCASE("conv2d on a 4x4 single-channel input") {
    NetworkSpec spec{{1, 4, 4}, {{Conv2d{1, 1, 2, 1}}, {Dense{9, 1}}, {SigmoidHead{}}}};
    const auto params = init_params(spec, rng);
    const auto data = testutil::random_batch(rng, 16, 4);
    CHECK(grad_check(spec, params, testutil::as_examples(data)) <= 1e-4);
  }
  SUBCASE("dropout is forced off") {
    NetworkSpec spec = residual_mlp(3, 4, 1, 0.5);
    const auto [params, data] = testutil::away_from_kinks(spec, rng, 5);
    CHECK(grad_check(spec, params, testutil::as_examples(data)) <= 1e-4);
  }
  SUBCASE("softmax head with two classes") {
    NetworkSpec spec{{3}, {{Dense{3, 2}}, {SoftmaxHead{2}}}};
    const auto params = init_params(spec, rng);
    const auto data = testutil::random_batch(rng, 3, 6);
    CHECK(grad_check(spec, params, testutil::as_examples(data)) <= 1e-7);
  }
}

TEST_CASE("lr_schedule") {
  TrainConfig cfg;
  CHECK(lr_schedule(1, cfg) == 1e-3);
  CHECK(lr_schedule(10, cfg) == 1e-3);
  CHECK(lr_schedule(12, cfg) == doctest::Approx(9.801e-4).epsilon(1e-12));
  CHECK(lr_schedule(100, cfg) > 0.0);
  CHECK_THROWS_AS(lr_schedule(0, cfg), DomainError);
}

TEST_CASE("train") {
  const auto data = testutil::separable_2d(200, 5);
  NetworkSpec spec = residual_mlp(2, 8, 1, 0.1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.base_lr = 0.05;
  cfg.seed = 17;

  const auto run = train(spec, data, cfg);
  REQUIRE(run.history.mean_loss.size() == 50);
  REQUIRE(run.history.learning_rate.size() == 50);
  CHECK(run.history.mean_loss.back() < run.history.mean_loss.front());
  CHECK(run.params.all_finite());

  const auto again = train(spec, data, cfg);
  CHECK(again.history.mean_loss == run.history.mean_loss);
  CHECK(again.params == run.params);

  TrainConfig other = cfg;
  other.seed = 18;
  CHECK_FALSE(train(spec, data, other).params == run.params);

  TrainConfig single;
  single.epochs = 1;
  single.batch_size = 1000;
  CHECK(train(spec, data, single).updates == 1);

  CHECK_THROWS_AS(train(spec, std::vector<DecisionRecord>{}, cfg), DataError);
  auto bad = data;
  bad[3].label = 2;
  CHECK_THROWS_AS(train(spec, bad, cfg), DataError);
  TrainConfig zero_epochs = cfg;
  zero_epochs.epochs = 0;
  CHECK_THROWS_AS(train(spec, data, zero_epochs), ConfigError);
}

TEST_CASE("train reports the epoch of a numeric failure") {
  auto data = testutil::separable_2d(20, 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double& v : data[i].features) v *= 1e200;
    data[i].label = i % 3 == 0;
  }
  NetworkSpec spec{{2}, {{Dense{2, 1}}, {SigmoidHead{}}}};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.base_lr = 1e200;
  try {
    train(spec, data, cfg);
    FAIL("expected NumericsError");
  } catch (const NumericsError& e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("spec and config JSON round trip") {
  NetworkSpec spec{{1, 6, 6},
                   {{Conv2d{1, 2, 3, 1}},
                    {Relu{}},
                    {Dense{32, 4}},
                    {Residual{{{Dense{4, 4}}, {Relu{}}}}},
                    {Dropout{0.3}},
                    {Dense{4, 2}},
                    {SoftmaxHead{2}}}};
  const auto j = to_json(spec);
  CHECK(to_json(spec_from_json(j)) == j);
  CHECK_THROWS_AS(spec_from_json(nlohmann::json{{"layers", nlohmann::json::array()}}),
                  SchemaError);

  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.seed = 99;
  CHECK(train_config_from_json(to_json(cfg)) == cfg);
  CHECK(train_config_from_json(nlohmann::json::object()) == TrainConfig{});
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"epochs", 0}}), ConfigError);
}

TEST_CASE("params binary format") {
  NetworkSpec spec{{2}, {{Dense{2, 1}}, {SigmoidHead{}}}};
  NetworkParams p = zero_params(spec);
  p.tensors[0].values = {1.5, -2.0};
  p.tensors[1].values = {0.25};
  const auto bytes = encode_params(p);
  // magic + version + (rank, 2 dims, 2 doubles) + (rank, 1 dim, 1 double)
  REQUIRE(bytes.size() == 4 + 2 + (1 + 8 + 16) + (1 + 4 + 8));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ELND");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);  // rank
  CHECK(bytes[7] == 1);  // out
  CHECK(bytes[11] == 2);  // in
  // 1.5 = 0x3FF8000000000000, little-endian.
  CHECK(bytes[15 + 6] == 0xF8);
  CHECK(bytes[15 + 7] == 0x3F);
  CHECK(decode_params(bytes) == p);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_params(truncated), DataError);
  auto wrong = bytes;
  wrong[0] = 'X';
  CHECK_THROWS_AS(decode_params(wrong), DataError);

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = init_params(residual_mlp(1 + rng.below(4), 1 + rng.below(5), rng.below(3), 0.2), rng);
    CHECK(decode_params(encode_params(q)) == q);
  }
}
