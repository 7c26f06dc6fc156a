#include "rvi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

namespace rvi {

using nlohmann::json;

std::string MethodConfig::label() const {
  std::string s = kind == DivergenceKind::kl ? std::string("KL") : std::string(divergence_name(kind));
  if (kind == DivergenceKind::kl) return s;
  if (!cv_grid.empty()) return s + "(cv)";
  std::ostringstream out;
  out << s << '=' << power;
  return out.str();
}

MethodConfig MethodConfig::from_json(const json& j) {
  MethodConfig m;
  try {
    m.kind = parse_divergence(j.value("divergence", std::string("kl")));
    m.power = j.value("power", m.kind == DivergenceKind::kl ? 0.0 : 0.1);
    m.cv_grid = j.value("cv_grid", std::vector<double>{});
    m.cv_folds = j.value("cv_folds", std::size_t{3});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("method entry: ") + e.what());
  }
  return m;
}

DataConfig DataConfig::from_json(const json& j) {
  DataConfig d;
  try {
    d.source = j.value("source", d.source);
    d.path = j.value("path", std::string());
    const std::string default_task =
        d.source == "toy_classification" || d.source == "eeg_surrogate" ? "classification" : "regression";
    d.task = parse_task(j.value("task", default_task));
    d.subsample = j.value("subsample", std::size_t{0});
    d.test_fraction = j.value("test_fraction", d.test_fraction);
    d.standardize = j.value("standardize", !d.toy());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("data section: ") + e.what());
  }
  return d;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (methods.empty()) throw ConfigError("experiment lists no methods");
  if (predict_mc < 1) throw ConfigError("predict_mc must be positive");
  const std::vector<std::string> sources{"toy_regression", "toy_classification", "csv", "powerplant_surrogate",
                                         "eeg_surrogate"};
  if (std::find(sources.begin(), sources.end(), data.source) == sources.end()) {
    throw ConfigError("unknown data source '" + data.source + "'");
  }
  if (data.source == "csv" && data.path.empty()) throw ConfigError("csv source needs a path");
  if (!data.toy()) {
    if (levels.empty()) throw ConfigError("experiment lists no contamination levels");
    ContaminationSpec probe{0.0, mode, noise_std, 0};
    for (double l : levels) {
      probe.fraction = l;
      probe.validate();
    }
  }
  for (const auto& m : methods) {
    if (m.kind != DivergenceKind::kl && m.cv_grid.empty()) DivergenceConfig{m.kind, m.power, 1, {}}.validate();
    for (double p : m.cv_grid) DivergenceConfig{m.kind, p, 1, {}}.validate();
    if (m.kind == DivergenceKind::kl && !m.cv_grid.empty()) throw ConfigError("KL has no power to cross-validate");
  }
  train.validate();
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("data")) c.data = DataConfig::from_json(j.at("data"));
    c.model = ModelConfig::from_json(j.value("model", json::object()), c.data.task);
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) c.methods.push_back(MethodConfig::from_json(m));
    }
    if (j.contains("train")) c.train = train_from_json(j.at("train"), c.train);
    if (j.contains("contamination")) {
      const auto& k = j.at("contamination");
      c.levels = k.value("levels", c.levels);
      c.mode = parse_contamination_mode(k.value("mode", std::string("both")));
      c.noise_std = k.value("noise_std", c.noise_std);
    }
    c.repetitions = j.value("repetitions", c.repetitions);
    c.seed = j.value("seed", c.seed);
    c.predict_mc = j.value("predict_mc", c.predict_mc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json ExperimentReport::to_json() const {
  json cells_json = json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"method", c.method},
                          {"contamination", c.contamination},
                          {"fraction", c.fraction},
                          {"metric", c.metric},
                          {"mean", c.mean},
                          {"std", c.std},
                          {"values", c.values},
                          {"n_reps", c.n_reps},
                          {"seed", c.seed},
                          {"hyperparameter", c.hyperparameter},
                          {"test_log_likelihood", c.test_log_likelihood}});
  }
  return json{{"name", name}, {"source", source}, {"surrogate", surrogate}, {"cells", cells_json}};
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "method,contamination,fraction,metric,mean,std,n_reps,seed,hyperparameter,test_log_likelihood\n";
  for (const auto& c : cells) {
    out << c.method << ',' << c.contamination << ',' << c.fraction << ',' << c.metric << ',' << c.mean << ','
        << c.std << ',' << c.n_reps << ',' << c.seed << ',';
    for (std::size_t i = 0; i < c.hyperparameter.size(); ++i) out << (i ? ";" : "") << c.hyperparameter[i];
    out << ',' << c.test_log_likelihood << '\n';
  }
  return out.str();
}

PreparedData prepare_data(const DataConfig& config, std::uint64_t source_seed, std::uint64_t split_seed,
                          bool with_outliers) {
  PreparedData out;
  if (config.toy()) {
    const bool regression = config.source == "toy_regression";
    out.train = regression ? generate_toy_regression(split_seed, with_outliers)
                           : generate_toy_classification(split_seed, with_outliers);
    out.test = regression ? generate_toy_regression(split_seed + 1, false)
                          : generate_toy_classification(split_seed + 1, false);
  } else {
    Dataset source;
    if (config.source == "csv") {
      source = load_csv(config.path, config.task);
    } else if (config.source == "powerplant_surrogate") {
      source = generate_powerplant_surrogate(source_seed);
    } else if (config.source == "eeg_surrogate") {
      source = generate_eeg_surrogate(source_seed);
    } else {
      throw ConfigError("unknown data source '" + config.source + "'");
    }
    // Test metrics use the observed targets of benchmark data.
    source.clean_targets.clear();
    if (config.subsample > 0) source = subsample(source, config.subsample, split_seed);
    auto split = train_test_split(source, config.test_fraction, split_seed + 1);
    out.train = std::move(split.train);
    out.test = std::move(split.test);
  }
  if (config.standardize) {
    out.standardizer = Standardizer::fit(out.train, true);
    out.train = out.standardizer->apply(out.train);
    out.test = out.standardizer->apply(out.test);
  }
  return out;
}

Evaluation evaluate(const MeanFieldGaussian& q, const Problem& problem, const PreparedData& data,
                    std::size_t predict_mc, std::uint64_t seed) {
  const Batch test = data.test.to_batch();
  Rng rng(seed);
  const auto pred = predict(q, problem.net, problem.lik, test.inputs, &test.targets, predict_mc, rng);
  Evaluation ev;
  double ll = 0.0;
  for (double v : pred.log_mean_likelihood) ll += v;
  ev.test_log_likelihood = ll / static_cast<double>(data.test.n);
  if (data.test.task == Task::binary_classification) {
    ev.metric = "accuracy";
    ev.value = accuracy(pred.mean, data.test.targets);
    return ev;
  }
  ev.metric = "rmse";
  const bool scaled = data.standardizer && data.standardizer->targets;
  if (scaled) ev.test_log_likelihood -= std::log(data.standardizer->target_scale);
  const auto& reference = data.test.clean_targets.empty() ? data.test.targets : data.test.clean_targets;
  std::vector<double> predicted(pred.mean), truth(reference);
  if (scaled) {
    for (auto& v : predicted) v = data.standardizer->invert_target(v);
    for (auto& v : truth) v = data.standardizer->invert_target(v);
  }
  ev.value = rmse(predicted, truth);
  return ev;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const bool toy = config.data.toy();
  const std::size_t M = config.methods.size();
  const std::size_t L = toy ? 2 : config.levels.size();
  const std::size_t R = config.repetitions;

  auto rep_seed = [&](std::size_t r) { return config.seed + 7919ULL * r; };
  // Prepared splits are shared by every method and level of a repetition.
  std::vector<PreparedData> prepared(toy ? 2 * R : R);
  for (std::size_t r = 0; r < R; ++r) {
    if (toy) {
      prepared[2 * r] = prepare_data(config.data, config.seed, rep_seed(r), false);
      prepared[2 * r + 1] = prepare_data(config.data, config.seed, rep_seed(r), true);
    } else {
      prepared[r] = prepare_data(config.data, config.seed, rep_seed(r), false);
    }
  }

  struct Outcome {
    Evaluation eval;
    double power = 0.0;
    double fraction = 0.0;
  };
  const std::size_t cells = M * L * R;
  std::vector<Outcome> outcomes(cells);
  parallel_for(cells, Execution::parallel, [&](std::size_t c) {
    const std::size_t m = c / (L * R);
    const std::size_t l = (c / R) % L;
    const std::size_t r = c % R;
    const MethodConfig& method = config.methods[m];
    const std::string where = "cell (" + method.label() + ", level " + std::to_string(l) + ", rep " +
                              std::to_string(r) + "): ";
    try {
      PreparedData data = prepared[toy ? 2 * r + l : r];
      Outcome& out = outcomes[c];
      if (toy) {
        out.fraction = static_cast<double>(data.train.outlier_count()) / static_cast<double>(data.train.n);
      } else if (config.levels[l] > 0.0) {
        const ContaminationSpec spec{config.levels[l], config.mode, config.noise_std, rep_seed(r) + 104729ULL * (l + 1)};
        data.train = contaminate(data.train, spec).data;
        out.fraction = config.levels[l];
      }
      const Batch train = data.train.to_batch();
      TrainConfig t = config.train;
      t.seed = rep_seed(r);
      t.execution = Execution::serial;
      DivergenceConfig div{method.kind, method.power, data.train.n, {}};
      if (!method.cv_grid.empty()) {
        const Problem base = config.model.problem(data.train.d, div.with_power(method.cv_grid.front()));
        div.power = cross_validate(method.cv_grid, method.cv_folds, base, train, t).best;
      }
      out.power = div.power;
      const Problem problem = config.model.problem(data.train.d, div);
      const auto fitted = fit(problem, train, t);
      out.eval = evaluate(fitted.q, problem, data, config.predict_mc, t.seed + 17);
    } catch (const NumericError& e) {
      throw NumericError(where + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  });

  ExperimentReport report;
  report.name = config.name;
  report.source = config.data.source;
  report.surrogate = config.data.source.find("surrogate") != std::string::npos;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t l = 0; l < L; ++l) {
      CellResult cell;
      cell.method = config.methods[m].label();
      cell.n_reps = R;
      cell.seed = config.seed;
      double ll = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const Outcome& o = outcomes[(m * L + l) * R + r];
        cell.metric = o.eval.metric;
        cell.values.push_back(o.eval.value);
        cell.fraction = o.fraction;
        ll += o.eval.test_log_likelihood / static_cast<double>(R);
        if (config.methods[m].kind != DivergenceKind::kl) cell.hyperparameter.push_back(o.power);
      }
      for (double v : cell.values) cell.mean += v / static_cast<double>(R);
      if (R > 1) {
        double s = 0.0;
        for (double v : cell.values) s += (v - cell.mean) * (v - cell.mean);
        cell.std = std::sqrt(s / static_cast<double>(R - 1));
      }
      cell.test_log_likelihood = ll;
      std::ostringstream label;
      if (toy) {
        label << (l == 0 ? "none" : "generator");
      } else {
        label << config.levels[l] * 100.0 << '%';
      }
      cell.contamination = label.str();
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace rvi
