#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "elicitd/beta.hpp"
#include "elicitd/diagnostics.hpp"
#include "elicitd/elicitation.hpp"
#include "elicitd/errors.hpp"
#include "elicitd/net.hpp"
#include "elicitd/net_io.hpp"
#include "elicitd/pipeline.hpp"
#include "elicitd/random.hpp"
#include "elicitd/synthetic.hpp"

namespace py = pybind11;
using namespace elicitd;

namespace {

py::dict as_dict(const elicit::ElicitedDistribution& d) {
  py::dict out;
  out["alpha"] = d.alpha;
  out["beta"] = d.beta;
  out["mean"] = d.mean();
  out["sample_mean"] = d.sample_mean;
  out["sample_var"] = d.sample_var;
  out["ci95"] = py::make_tuple(d.ci95.lo, d.ci95.hi);
  out["degenerate"] = d.degenerate;
  out["T"] = d.T;
  out["seed"] = d.seed;
  return out;
}

std::vector<DecisionRecord> to_records(const std::vector<std::vector<double>>& X,
                                       const std::vector<int>& y) {
  if (X.size() != y.size()) throw ShapeError("X and y have different lengths");
  std::vector<DecisionRecord> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    out[i].id = "r" + std::to_string(i);
    out[i].features = X[i];
    out[i].label = y[i];
  }
  return out;
}

// Residual MLP plus trained parameters, the unit most Python callers need.
class Model {
 public:
  Model(std::size_t input_dim, std::size_t width, std::size_t blocks, double dropout,
        std::uint64_t seed)
      : spec_(net::residual_mlp(input_dim, width, blocks, dropout)) {
    Rng rng = Rng::for_stream(seed, Stream::kTrain);
    params_ = net::init_params(spec_, rng);
  }

  std::vector<double> fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                          int epochs, double base_lr, int batch_size, std::uint64_t seed) {
    net::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.base_lr = base_lr;
    cfg.batch_size = batch_size;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(Stream::kTrain));
    cfg.validate();
    const auto records = to_records(X, y);
    auto result = net::train(spec_, records, cfg);
    params_ = std::move(result.params);
    return result.history.mean_loss;
  }

  double predict(const std::vector<double>& x) const {
    const auto out = net::forward(spec_, params_, x, net::Mode::kEval, nullptr);
    return net::positive_probability(out);
  }

  std::vector<double> mc_sample(const std::vector<double>& x, std::size_t T,
                                std::uint64_t seed) const {
    return elicit::mc_sample(spec_, params_, x, T, seed).values;
  }

  py::dict elicit(const std::vector<double>& x, std::size_t T, std::uint64_t seed) const {
    return as_dict(elicit::fit_beta_mom(elicit::mc_sample(spec_, params_, x, T, seed)));
  }

  std::string spec_json() const { return net::to_json(spec_).dump(); }
  std::size_t parameter_count() const { return params_.size(); }
  void save(const std::filesystem::path& path) const { net::save_params(params_, path); }
  void load(const std::filesystem::path& path) {
    auto params = net::load_params(path);
    net::check_params(spec_, params);
    params_ = std::move(params);
  }

 private:
  net::NetworkSpec spec_;
  net::NetworkParams params_;
};

void run_command(const std::string& command, const std::string& config_json,
                 std::optional<std::uint64_t> seed, std::optional<std::string> out, bool quiet) {
  pipeline::Overrides o;
  o.seed = seed;
  if (out) o.out = *out;
  o.quiet = quiet;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(e.what());
  }
  const auto cfg = pipeline::make_run_config(doc, o);
  std::ostringstream sink;
  if (command == "synth") pipeline::cmd_synth(cfg, sink);
  else if (command == "train") pipeline::cmd_train(cfg, sink);
  else if (command == "elicit") pipeline::cmd_elicit(cfg, sink, sink);
  else if (command == "evaluate") pipeline::cmd_evaluate(cfg, sink, sink);
  else if (command == "report") pipeline::cmd_report(cfg, sink);
  else throw ConfigError("unknown command '" + command + "'");
  if (!quiet && !sink.str().empty()) py::print(sink.str(), py::arg("end") = "");
}

}  // namespace

PYBIND11_MODULE(_elicitd, m) {
  m.doc() = "MC-dropout prior elicitation core";

  auto base = py::register_exception<Error>(m, "ElicitdError", PyExc_ValueError);
  py::register_exception<IoError>(m, "ElicitdIoError", base.ptr());
  py::register_exception<NumericsError>(m, "NumericsError", base.ptr());

  m.def("beta_pdf", &beta::pdf, py::arg("alpha"), py::arg("beta"), py::arg("x"));
  m.def("beta_cdf", &beta::cdf, py::arg("alpha"), py::arg("beta"), py::arg("x"));

  m.def(
      "fit_beta",
      [](const std::vector<double>& values) {
        elicit::ProbabilitySample s;
        s.values = values;
        return as_dict(elicit::fit_beta_mom(s));
      },
      py::arg("values"), "Method-of-moments Beta fit with a 95% percentile interval.");
  m.def("beta_from_moments", &elicit::beta_from_moments, py::arg("mean"), py::arg("variance"));
  m.def(
      "credible_interval",
      [](const std::vector<double>& values, double level) {
        const auto ci = elicit::credible_interval(values, level);
        return py::make_tuple(ci.lo, ci.hi);
      },
      py::arg("values"), py::arg("level") = 0.95);
  m.def(
      "distribution_entropy",
      [](const std::vector<double>& values, std::size_t bins) {
        return elicit::distribution_entropy(values, bins);
      },
      py::arg("values"), py::arg("bins") = 10);
  m.def("point_entropy", &elicit::point_entropy, py::arg("q"));
  m.def(
      "kl_divergence",
      [](const std::vector<double>& q, const std::vector<double>& p) {
        return elicit::kl_divergence(elicit::DiscreteDistribution{q},
                                     elicit::DiscreteDistribution{p});
      },
      py::arg("q"), py::arg("p"), "KL(q || p) in nats.");
  m.def(
      "discretize_beta",
      [](double a, double b, std::size_t bins) { return elicit::discretize_beta(a, b, bins).probs; },
      py::arg("alpha"), py::arg("beta"), py::arg("bins"));

  m.def(
      "ci_correct",
      [](double lo, double hi, int label) {
        const auto o = diag::ci_correct({lo, hi}, label);
        return py::make_tuple(o.correct, o.centered);
      },
      py::arg("lo"), py::arg("hi"), py::arg("label"),
      "Returns (correct, centered) under the 95% CI rule.");
  m.def(
      "f_score",
      [](std::size_t tn, std::size_t fp, std::size_t fn, std::size_t tp) {
        return diag::f_score({tn, fp, fn, tp}).f;
      },
      py::arg("tn"), py::arg("fp"), py::arg("fn"), py::arg("tp"));

  m.def(
      "generate_panel",
      [](std::size_t n, int K, double noise, std::uint64_t seed, const std::string& truth,
         std::size_t n_features, double constant_p) {
        synth::PanelConfig cfg;
        cfg.n = n;
        cfg.K = K;
        cfg.noise = noise;
        cfg.seed = seed;
        cfg.truth = synth::truth_function_from_string(truth);
        cfg.n_features = n_features;
        cfg.constant_p = constant_p;
        const auto panel = synth::generate(cfg);
        py::dict out;
        std::vector<std::vector<double>> X;
        std::vector<int> y, agreement;
        std::vector<double> p;
        for (std::size_t i = 0; i < panel.records.size(); ++i) {
          X.push_back(panel.records[i].features);
          y.push_back(panel.records[i].label);
          agreement.push_back(*panel.records[i].agreement);
          p.push_back(panel.truth[i].p_true);
        }
        out["X"] = X;
        out["y"] = y;
        out["agreement"] = agreement;
        out["p_true"] = p;
        return out;
      },
      py::arg("n"), py::arg("K") = 7, py::arg("noise") = 0.1, py::arg("seed") = 0,
      py::arg("truth") = "logistic", py::arg("n_features") = 4, py::arg("constant_p") = 0.5);

  py::class_<Model>(m, "Model")
      .def(py::init<std::size_t, std::size_t, std::size_t, double, std::uint64_t>(),
           py::arg("input_dim"), py::arg("width") = 32, py::arg("blocks") = 2,
           py::arg("dropout") = 0.2, py::arg("seed") = 0)
      .def("fit", &Model::fit, py::arg("X"), py::arg("y"), py::arg("epochs") = 100,
           py::arg("base_lr") = 1e-3, py::arg("batch_size") = 32, py::arg("seed") = 0,
           "Trains in place; returns the per-epoch mean loss.")
      .def("predict", &Model::predict, py::arg("x"))
      .def("mc_sample", &Model::mc_sample, py::arg("x"), py::arg("T") = 100, py::arg("seed") = 0)
      .def("elicit", &Model::elicit, py::arg("x"), py::arg("T") = 100, py::arg("seed") = 0)
      .def("spec_json", &Model::spec_json)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("save", &Model::save, py::arg("path"))
      .def("load", &Model::load, py::arg("path"));

  m.def("run", &run_command, py::arg("command"), py::arg("config_json"),
        py::arg("seed") = py::none(), py::arg("out") = py::none(), py::arg("quiet") = true,
        "Runs one pipeline subcommand with a JSON configuration string.");
}
