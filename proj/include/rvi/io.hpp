#pragma once

// JSON configuration parsing and checkpoint files.

#include <filesystem>

#include <json.hpp>

#include "rvi/data.hpp"
#include "rvi/influence.hpp"
#include "rvi/meanfield.hpp"

namespace rvi {

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

/// Hidden widths, activation, likelihood and prior scale; input and output
/// widths come from the data.
struct ModelConfig {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::relu;
  LikelihoodSpec likelihood = LikelihoodSpec::gaussian(1.0);
  double prior_std = 1.0;

  static ModelConfig from_json(const nlohmann::json& j, Task task);
  nlohmann::json to_json() const;
  NetworkSpec network(std::size_t input_dim) const;
  Problem problem(std::size_t input_dim, const DivergenceConfig& divergence) const;
};

nlohmann::json to_json(const NetworkSpec& net);
NetworkSpec network_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LikelihoodSpec& lik);
LikelihoodSpec likelihood_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DivergenceConfig& d);
/// {"divergence": "beta", "power": 0.1}; n_total is filled in by the caller.
DivergenceConfig divergence_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& t);
/// Missing keys keep `defaults`.
TrainConfig train_from_json(const nlohmann::json& j, TrainConfig defaults = {});
InfluenceOptions influence_options_from_json(const nlohmann::json& j, InfluenceOptions defaults = {});

/// Fitted model plus what is needed to reproduce predictions.
struct Checkpoint {
  Problem problem;
  MeanFieldGaussian q;
  std::optional<Standardizer> standardizer;
  Task task = Task::regression;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rvi
