#include "rvi/io.hpp"

#include <fstream>

namespace rvi {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const NetworkSpec& net) {
  return json{{"widths", net.widths}, {"activation", activation_name(net.activation)}};
}

NetworkSpec network_from_json(const json& j) {
  NetworkSpec net{get_or<std::vector<std::size_t>>(j, "widths", {}),
                  parse_activation(get_or<std::string>(j, "activation", "linear"))};
  net.validate();
  return net;
}

json to_json(const LikelihoodSpec& lik) {
  return json{{"kind", likelihood_name(lik.kind)}, {"sigma", lik.sigma}, {"epsilon", lik.epsilon}, {"nu", lik.nu}};
}

LikelihoodSpec likelihood_from_json(const json& j) {
  if (j.is_string()) {
    LikelihoodSpec lik{parse_likelihood(j.get<std::string>())};
    lik.validate();
    return lik;
  }
  LikelihoodSpec lik;
  lik.kind = parse_likelihood(get_or<std::string>(j, "kind", "gaussian"));
  lik.sigma = get_or(j, "sigma", lik.sigma);
  lik.epsilon = get_or(j, "epsilon", lik.epsilon);
  lik.nu = get_or(j, "nu", lik.nu);
  lik.validate();
  return lik;
}

json to_json(const DivergenceConfig& d) {
  json j{{"divergence", divergence_name(d.kind)}, {"power", d.power}, {"n_total", d.n_total}};
  if (d.data_weight) j["data_weight"] = *d.data_weight;
  return j;
}

DivergenceConfig divergence_from_json(const json& j) {
  DivergenceConfig d;
  d.kind = parse_divergence(get_or<std::string>(j, "divergence", "kl"));
  d.power = get_or(j, "power", d.kind == DivergenceKind::kl ? 0.0 : 0.1);
  d.n_total = get_or<std::size_t>(j, "n_total", 1);
  if (j.contains("data_weight")) d.data_weight = get_or(j, "data_weight", 1.0);
  return d;
}

json to_json(const TrainConfig& t) {
  return json{{"lr", t.learning_rate}, {"mc", t.mc_samples}, {"batch", t.batch_size}, {"epochs", t.epochs},
              {"seed", t.seed}};
}

TrainConfig train_from_json(const json& j, TrainConfig t) {
  t.learning_rate = get_or(j, "lr", t.learning_rate);
  t.mc_samples = get_or(j, "mc", t.mc_samples);
  t.batch_size = get_or(j, "batch", t.batch_size);
  t.epochs = get_or(j, "epochs", t.epochs);
  t.seed = get_or(j, "seed", t.seed);
  t.validate();
  return t;
}

InfluenceOptions influence_options_from_json(const json& j, InfluenceOptions o) {
  o.gradient_mc = get_or(j, "gradient_mc", o.gradient_mc);
  o.hessian_mc = get_or(j, "hessian_mc", o.hessian_mc);
  o.share_draws = get_or(j, "share_draws", o.share_draws);
  o.damping = get_or(j, "damping", o.damping);
  o.max_damping = get_or(j, "max_damping", o.max_damping);
  o.cg_tol = get_or(j, "cg_tol", o.cg_tol);
  o.cg_max_iter = get_or(j, "cg_max_iter", o.cg_max_iter);
  if (j.contains("scope")) {
    const auto s = get_or<std::string>(j, "scope", "means");
    if (s == "means") {
      o.scope = HessianScope::means;
    } else if (s == "means_and_scales") {
      o.scope = HessianScope::means_and_scales;
    } else {
      throw ConfigError("unknown influence scope '" + s + "'");
    }
  }
  o.seed = get_or(j, "seed", o.seed);
  o.validate();
  return o;
}

ModelConfig ModelConfig::from_json(const json& j, Task task) {
  ModelConfig m;
  m.hidden = get_or<std::vector<std::size_t>>(j, "hidden", {});
  m.activation = parse_activation(get_or<std::string>(j, "activation", "relu"));
  if (j.contains("likelihood")) {
    m.likelihood = likelihood_from_json(j.at("likelihood"));
  } else {
    m.likelihood = task == Task::binary_classification ? LikelihoodSpec::logistic() : LikelihoodSpec::gaussian(1.0);
  }
  m.prior_std = get_or(j, "prior_std", 1.0);
  if (!(m.prior_std > 0.0)) throw ConfigError("prior_std must be positive");
  if (task == Task::binary_classification && !m.likelihood.binary()) {
    throw ConfigError("classification needs a logistic likelihood");
  }
  if (task == Task::regression && m.likelihood.binary()) throw ConfigError("regression needs a continuous likelihood");
  return m;
}

json ModelConfig::to_json() const {
  return json{{"hidden", hidden},
              {"activation", activation_name(activation)},
              {"likelihood", rvi::to_json(likelihood)},
              {"prior_std", prior_std}};
}

NetworkSpec ModelConfig::network(std::size_t input_dim) const {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return NetworkSpec::mlp(widths, activation);
}

Problem ModelConfig::problem(std::size_t input_dim, const DivergenceConfig& divergence) const {
  const NetworkSpec net = network(input_dim);
  const std::size_t P = net.param_count();
  Problem p{net, likelihood, PriorSpec{std::vector<double>(P, 0.0), std::vector<double>(P, prior_std)}, divergence};
  p.validate();
  return p;
}

json Checkpoint::to_json() const {
  json j{{"network", rvi::to_json(problem.net)},
         {"likelihood", rvi::to_json(problem.lik)},
         {"divergence", rvi::to_json(problem.divergence)},
         {"prior", {{"mean", problem.prior.mean}, {"std", problem.prior.std}}},
         {"q", {{"means", q.means}, {"raw_scales", q.raw_scales}}},
         {"task", task_name(task)}};
  if (standardizer) {
    const auto& s = *standardizer;
    j["standardizer"] = {{"mean", s.mean},
                         {"scale", s.scale},
                         {"targets", s.targets},
                         {"target_mean", s.target_mean},
                         {"target_scale", s.target_scale}};
  }
  return j;
}

Checkpoint Checkpoint::from_json(const json& j) {
  try {
    Checkpoint c;
    c.problem.net = network_from_json(j.at("network"));
    c.problem.lik = likelihood_from_json(j.at("likelihood"));
    c.problem.divergence = divergence_from_json(j.at("divergence"));
    c.problem.prior.mean = j.at("prior").at("mean").get<std::vector<double>>();
    c.problem.prior.std = j.at("prior").at("std").get<std::vector<double>>();
    c.q.means = j.at("q").at("means").get<std::vector<double>>();
    c.q.raw_scales = j.at("q").at("raw_scales").get<std::vector<double>>();
    c.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("standardizer")) {
      const auto& s = j.at("standardizer");
      Standardizer st;
      st.mean = s.at("mean").get<std::vector<double>>();
      st.scale = s.at("scale").get<std::vector<double>>();
      st.targets = s.at("targets").get<bool>();
      st.target_mean = s.at("target_mean").get<double>();
      st.target_scale = s.at("target_scale").get<double>();
      c.standardizer = st;
    }
    c.problem.validate();
    c.q.validate(c.problem.net.param_count());
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) { write_json_file(c.to_json(), path); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return Checkpoint::from_json(read_json_file(path)); }

}  // namespace rvi
