// rvi: command-line front end for training, prediction, data generation,
// experiments, influence analysis and oracle checks.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>

#include "rvi/experiment.hpp"
#include "rvi/oracles.hpp"

using nlohmann::json;
using namespace rvi;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> overrides;
};

// "a.b.c=value": value parsed as JSON when possible, otherwise kept as a string.
void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' is not key=value");
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

json load_config(const Globals& g, bool required) {
  json j = json::object();
  if (!g.config.empty()) {
    j = read_json_file(g.config);
  } else if (required) {
    throw ConfigError("--config is required for this command");
  }
  for (const auto& o : g.overrides) apply_override(j, o);
  if (g.seed) j["seed"] = *g.seed;
  return j;
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(j, out);
    std::cerr << "wrote " << out << '\n';
  }
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << text;
}

// Data, model and single method shared by train, cv, influence-sweep and label-flip.
struct Setup {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
  PreparedData prepared;
};

Setup load_setup(const json& j) {
  Setup s;
  s.seed = j.value("seed", std::uint64_t{0});
  s.data = DataConfig::from_json(j.value("data", json::object()));
  s.model = ModelConfig::from_json(j.value("model", json::object()), s.data.task);
  s.train = train_from_json(j.value("train", json::object()));
  s.train.seed = s.seed;
  s.train.execution = Execution::parallel;
  s.prepared = prepare_data(s.data, s.seed, s.seed, j.value("toy_outliers", true));
  if (j.contains("contamination") && !s.data.toy()) {
    const auto& k = j.at("contamination");
    ContaminationSpec spec{k.value("fraction", 0.0), parse_contamination_mode(k.value("mode", std::string("both"))),
                           k.value("noise_std", 6.0), s.seed + 1};
    auto res = contaminate(s.prepared.train, spec);
    if (!res.warning.empty()) std::cerr << "warning: " << res.warning << '\n';
    s.prepared.train = std::move(res.data);
  }
  return s;
}

std::vector<MethodConfig> methods_of(const json& j) {
  std::vector<MethodConfig> out;
  if (j.contains("methods")) {
    for (const auto& m : j.at("methods")) out.push_back(MethodConfig::from_json(m));
  } else if (j.contains("method")) {
    out.push_back(MethodConfig::from_json(j.at("method")));
  } else {
    out.push_back(MethodConfig{});
  }
  return out;
}

struct Trained {
  Problem problem;
  MeanFieldGaussian q;
};

Trained train_method(const Setup& s, const MethodConfig& m) {
  const Batch train = s.prepared.train.to_batch();
  DivergenceConfig div{m.kind, m.power, s.prepared.train.n, {}};
  if (!m.cv_grid.empty()) {
    div.power = cross_validate(m.cv_grid, m.cv_folds, s.model.problem(s.prepared.train.d, div.with_power(m.cv_grid[0])),
                               train, s.train)
                    .best;
  }
  const Problem problem = s.model.problem(s.prepared.train.d, div);
  return {problem, fit(problem, train, s.train).q};
}

int cmd_train(const Globals& g) {
  const json j = load_config(g, true);
  const Setup s = load_setup(j);
  const auto methods = methods_of(j);
  const Trained t = train_method(s, methods.front());
  const auto ev = evaluate(t.q, t.problem, s.prepared, j.value("predict_mc", std::size_t{50}), s.seed + 17);
  Checkpoint c{t.problem, t.q, s.prepared.standardizer, s.data.task};
  if (!g.out.empty()) save_checkpoint(c, g.out);
  std::cout << json{{"method", t.problem.divergence.label()},
                    {"metric", ev.metric},
                    {"value", ev.value},
                    {"test_log_likelihood", ev.test_log_likelihood},
                    {"checkpoint", g.out}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_predict(const Globals& g, const std::string& checkpoint, const std::string& data_path, std::size_t mc) {
  if (checkpoint.empty() || data_path.empty()) throw ConfigError("predict needs --checkpoint and --data");
  const Checkpoint c = load_checkpoint(checkpoint);
  Dataset data = load_csv(data_path, c.task);
  if (c.standardizer) data = c.standardizer->apply(data);
  const Batch b = data.to_batch();
  Rng rng(g.seed.value_or(0));
  const auto pred = predict(c.q, c.problem.net, c.problem.lik, b.inputs, &b.targets, mc, rng);
  std::ostringstream out;
  out.precision(17);
  out << (c.task == Task::binary_classification ? "prob_one" : "mean") << ",log_predictive\n";
  const bool scaled = c.standardizer && c.standardizer->targets;
  for (std::size_t i = 0; i < data.n; ++i) {
    const double m = scaled ? c.standardizer->invert_target(pred.mean[i]) : pred.mean[i];
    const double lp = pred.log_mean_likelihood[i] - (scaled ? std::log(c.standardizer->target_scale) : 0.0);
    out << m << ',' << lp << '\n';
  }
  if (g.out.empty()) {
    std::cout << out.str();
  } else {
    write_text(out.str(), g.out);
  }
  return 0;
}

int cmd_toy_gen(const Globals& g, const std::string& task, bool clean) {
  if (g.out.empty()) throw ConfigError("toy-gen needs --out");
  const std::uint64_t seed = g.seed.value_or(0);
  Dataset d;
  if (task == "regression") {
    d = generate_toy_regression(seed, !clean);
  } else if (task == "classification") {
    d = generate_toy_classification(seed, !clean);
  } else {
    throw ConfigError("unknown toy task '" + task + "'");
  }
  write_csv(d, g.out);
  std::cout << json{{"rows", d.n}, {"outliers", d.outlier_count()}, {"out", g.out}}.dump() << '\n';
  return 0;
}

int cmd_contaminate(const Globals& g, const std::string& data_path, const std::string& task, double fraction,
                    const std::string& mode, double noise_std, bool standardize) {
  if (data_path.empty() || g.out.empty()) throw ConfigError("contaminate needs --data and --out");
  Dataset d = load_csv(data_path, parse_task(task));
  if (standardize) d = Standardizer::fit(d, false).apply(d);
  const auto res = contaminate(d, ContaminationSpec{fraction, parse_contamination_mode(mode), noise_std, g.seed.value_or(0)});
  if (!res.warning.empty()) std::cerr << "warning: " << res.warning << '\n';
  write_csv(res.data, g.out);
  std::cout << json{{"rows", res.rows}, {"features", res.features}, {"out", g.out}}.dump() << '\n';
  return 0;
}

int cmd_experiment(const Globals& g, const std::string& csv) {
  const json j = load_config(g, true);
  const auto config = ExperimentConfig::from_json(j);
  const auto report = run_experiment(config);
  emit(report.to_json(), g.out);
  if (!csv.empty()) write_text(report.to_csv(), csv);
  return 0;
}

int cmd_cv(const Globals& g) {
  const json j = load_config(g, true);
  const Setup s = load_setup(j);
  const auto m = methods_of(j).front();
  if (m.cv_grid.empty()) throw ConfigError("cv needs a method with cv_grid");
  const Batch train = s.prepared.train.to_batch();
  const DivergenceConfig div{m.kind, m.cv_grid[0], s.prepared.train.n, {}};
  const auto r = cross_validate(m.cv_grid, m.cv_folds, s.model.problem(s.prepared.train.d, div), train, s.train);
  emit(json{{"best", r.best},
            {"grid", r.grid},
            {"scores", r.scores},
            {"metric", r.higher_is_better ? "accuracy" : "rmse"}},
       g.out);
  return 0;
}

int cmd_influence_sweep(const Globals& g, const std::string& csv) {
  const json j = load_config(g, true);
  const Setup s = load_setup(j);
  const auto options = influence_options_from_json(j.value("influence", json::object()));
  const auto sj = j.value("sweep", json::object());
  Rng pick(s.seed + 3);
  const std::size_t base = sj.value("base_index", std::size_t(pick() % s.prepared.train.n));
  const std::size_t test_row = sj.value("test_index", std::size_t(pick() % s.prepared.test.n));
  SweepSpec spec;
  spec.base_index = base;
  spec.axis = sj.value("axis", std::string("output")) == "input" ? SweepAxis::input : SweepAxis::output;
  spec.feature = sj.value("feature", std::size_t{0});
  const Batch train = s.prepared.train.to_batch();
  const double original = spec.axis == SweepAxis::input ? s.prepared.train.x(base, spec.feature)
                                                        : s.prepared.train.targets[base];
  spec.magnitudes = sj.value("magnitudes", default_sweep_grid(original));
  spec.test = s.prepared.test.subset({test_row}).to_batch();

  std::vector<InfluenceContext> contexts;
  for (const auto& m : methods_of(j)) {
    const Trained t = train_method(s, m);
    contexts.emplace_back(t.problem, t.q, train, options);
  }
  std::vector<const InfluenceContext*> ptrs;
  for (const auto& c : contexts) ptrs.push_back(&c);
  const auto points = outlier_sweep(ptrs, spec);
  std::ostringstream table;
  table.precision(17);
  table << "method,axis,magnitude,predictive_influence,point_influence,log10_abs_point_influence,cg_residual,damping\n";
  json rows = json::array();
  for (const auto& p : points) {
    table << p.method << ',' << p.axis << ',' << p.magnitude << ',' << p.predictive_influence << ','
          << p.point_influence << ',' << p.log10_abs_point_influence << ',' << p.cg_residual << ',' << p.damping << '\n';
    rows.push_back({{"method", p.method},
                    {"axis", p.axis},
                    {"magnitude", p.magnitude},
                    {"predictive_influence", p.predictive_influence},
                    {"point_influence", p.point_influence},
                    {"log10_abs_point_influence", p.log10_abs_point_influence},
                    {"cg_residual", p.cg_residual},
                    {"damping", p.damping}});
  }
  if (!csv.empty()) write_text(table.str(), csv);
  json stat = json::array();
  for (const auto& c : contexts) stat.push_back({{"method", c.problem().divergence.label()}, {"stationarity", c.stationarity()}});
  emit(json{{"base_index", base}, {"test_index", test_row}, {"points", rows}, {"fits", stat}}, g.out);
  return 0;
}

int cmd_label_flip(const Globals& g) {
  const json j = load_config(g, true);
  const Setup s = load_setup(j);
  if (s.data.task != Task::binary_classification) throw ConfigError("label-flip needs a classification task");
  const auto options = influence_options_from_json(j.value("influence", json::object()));
  const Batch train = s.prepared.train.to_batch();
  const Batch test = s.prepared.test.to_batch();
  json rows = json::array();
  for (const auto& m : methods_of(j)) {
    const Trained t = train_method(s, m);
    const InfluenceContext ctx(t.problem, t.q, train, options);
    const auto r = label_flip_average(ctx, test);
    rows.push_back({{"method", r.method},
                    {"average", r.average},
                    {"cg_residual", r.cg_residual},
                    {"damping", r.damping},
                    {"n_train", r.n_train},
                    {"n_test", r.n_test},
                    {"stationarity", ctx.stationarity()}});
  }
  emit(json{{"results", rows}}, g.out);
  return 0;
}

int cmd_oracle_check(const Globals& g, const std::string& which) {
  const json j = load_config(g, false);
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});
  if (which == "pseudo-posterior") {
    const auto n = j.value("n", std::size_t{50});
    const auto outlier = j.value("outlier", 0.0);
    Rng rng(seed);
    std::normal_distribution<double> normal(j.value("mean", 1.0), 1.0);
    OracleData data;
    for (std::size_t i = 0; i < n; ++i) data.y.push_back(normal(rng));
    if (outlier != 0.0) data.y.push_back(outlier);
    auto div = divergence_from_json(j.value("divergence", json{{"divergence", "kl"}}));
    div.n_total = data.size();
    const QuadratureGrid grid{{j.value("lower", -4.0)}, {j.value("upper", 6.0)}, j.value("points", std::size_t{2001})};
    const auto post = pseudo_posterior_quadrature(OracleModel::gaussian_mean, 1.0, data, div, PriorSpec::standard(1), grid);
    const auto fine = pseudo_posterior_quadrature(OracleModel::gaussian_mean, 1.0, data, div, PriorSpec::standard(1),
                                                  grid.refined());
    emit(json{{"which", which}, {"divergence", div.label()}, {"n", data.size()}, {"quadrature", to_json(post)},
              {"refined", to_json(fine)}},
         g.out);
    return 0;
  }
  if (which == "power-integral") {
    const auto lik = likelihood_from_json(j.value("likelihood", json{{"kind", "gaussian"}}));
    json rows = json::array();
    for (double e : j.value("exponents", std::vector<double>{1.0, 1.1, 1.5, 2.0})) {
      json row{{"exponent", e}, {"quadrature", quadrature_power_integral(lik, 0.0, e)}};
      try {
        row["closed_form"] = power_integral(lik, Tensor({1, 1}, {0.0}), e)[0];
      } catch (const UnsupportedError&) {
        row["closed_form"] = nullptr;
      }
      rows.push_back(row);
    }
    emit(json{{"which", which}, {"likelihood", to_json(lik)}, {"rows", rows}}, g.out);
    return 0;
  }
  if (which == "estimating-equation") {
    const auto r = estimating_equation_check(j.value("mu", 0.0), j.value("sigma", 1.0), j.value("beta", 0.5),
                                             j.value("n_mc", std::size_t{200000}), seed);
    emit(json{{"which", which}, {"result", to_json(r)}}, g.out);
    return 0;
  }
  if (which == "retrain") {
    const std::size_t n = j.value("n", std::size_t{40});
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = normal(rng);
      y[i] = 0.7 * x[i] + 0.2 + 0.3 * normal(rng);
    }
    auto div = divergence_from_json(j.value("divergence", json{{"divergence", "kl"}}));
    div.n_total = n;
    const Problem problem{NetworkSpec::linear(1), LikelihoodSpec::gaussian(0.3), PriorSpec::standard(2), div};
    const Batch data{Tensor({n, 1}, x), Tensor({n, 1}, y)};
    InfluenceOptions io;
    io.share_draws = true;
    io.hessian_mc = j.value("mc", std::size_t{50});
    io.damping = 0.0;
    io.cg_tol = 1e-12;
    io.seed = seed;
    const AddPoint z{{j.value("x", 1.5)}, {j.value("y", 3.0)}};
    const InfluenceContext probe(problem, MeanFieldGaussian{{0.0, 0.0}, {-3.0, -3.0}}, data, io);
    const auto oracle = retrain_if_oracle(problem, data, probe.q(), z, probe.hessian_draws());
    const InfluenceContext ctx(problem, oracle.base, data, io);
    const auto iv = influence_vector(ctx, z);
    emit(json{{"which", which}, {"oracle", to_json(oracle)}, {"influence_vector", iv.if_vector}}, g.out);
    return 0;
  }
  throw ConfigError("unknown oracle '" + which + "' (pseudo-posterior, power-integral, estimating-equation, retrain)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust variational inference toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "OpenMP threads (0 keeps the default)");
  app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");

  auto* train = app.add_subcommand("train", "Fit a model and write a checkpoint");
  auto* predict_cmd = app.add_subcommand("predict", "Predict with a checkpoint");
  std::string checkpoint, data_path;
  std::size_t mc = 100;
  predict_cmd->add_option("--checkpoint", checkpoint)->required();
  predict_cmd->add_option("--data", data_path)->required();
  predict_cmd->add_option("--mc", mc);

  auto* toy = app.add_subcommand("toy-gen", "Write a toy dataset as CSV");
  std::string task = "regression";
  bool clean = false;
  toy->add_option("--task", task)->check(CLI::IsMember({"regression", "classification"}));
  toy->add_flag("--clean", clean, "Omit the generator outliers");

  auto* cont = app.add_subcommand("contaminate", "Inject outliers into a CSV dataset");
  double fraction = 0.1, noise_std = 6.0;
  std::string mode = "both", cont_task = "regression";
  bool standardize = false;
  cont->add_option("--data", data_path)->required();
  cont->add_option("--task", cont_task);
  cont->add_option("--fraction", fraction);
  cont->add_option("--mode", mode);
  cont->add_option("--noise-std", noise_std);
  cont->add_flag("--standardize", standardize);

  auto* exp = app.add_subcommand("experiment", "Run an experiment grid");
  std::string csv;
  exp->add_option("--csv", csv, "Also write the table as CSV");
  auto* cv = app.add_subcommand("cv", "Cross-validate the divergence power");
  auto* sweep = app.add_subcommand("influence-sweep", "Predictive influence of one moved training point");
  sweep->add_option("--csv", csv, "Also write the curve as CSV");
  auto* flip = app.add_subcommand("label-flip", "Average label-flip influence on the test log-likelihood");
  auto* oracle = app.add_subcommand("oracle-check", "Run a brute-force oracle");
  std::string which = "pseudo-posterior";
  oracle->add_option("--which", which);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (g.threads > 0) set_threads(g.threads);
    if (*train) return cmd_train(g);
    if (*predict_cmd) return cmd_predict(g, checkpoint, data_path, mc);
    if (*toy) return cmd_toy_gen(g, task, clean);
    if (*cont) return cmd_contaminate(g, data_path, cont_task, fraction, mode, noise_std, standardize);
    if (*exp) return cmd_experiment(g, csv);
    if (*cv) return cmd_cv(g);
    if (*sweep) return cmd_influence_sweep(g, csv);
    if (*flip) return cmd_label_flip(g);
    if (*oracle) return cmd_oracle_check(g, which);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
