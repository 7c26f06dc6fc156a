#pragma once

// Experiment grids: method x contamination level x repetition, with metrics
// on untouched test data.

#include <string>
#include <vector>

#include "rvi/io.hpp"

namespace rvi {

struct MethodConfig {
  DivergenceKind kind = DivergenceKind::kl;
  double power = 0.0;
  /// When non-empty the power is chosen by cross-validation on the training split.
  std::vector<double> cv_grid;
  std::size_t cv_folds = 3;

  std::string label() const;
  static MethodConfig from_json(const nlohmann::json& j);
};

struct DataConfig {
  /// toy_regression, toy_classification, csv, powerplant_surrogate or eeg_surrogate.
  std::string source = "toy_regression";
  std::string path;
  Task task = Task::regression;
  /// Rows kept before splitting; 0 keeps all.
  std::size_t subsample = 0;
  double test_fraction = 0.2;
  bool standardize = true;

  bool toy() const { return source.rfind("toy_", 0) == 0; }
  static DataConfig from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataConfig data;
  ModelConfig model;
  std::vector<MethodConfig> methods;
  TrainConfig train;
  /// Injected contamination fractions. Toy sources instead compare the clean
  /// generator against the one with its built-in outliers.
  std::vector<double> levels{0.0, 0.1, 0.2};
  ContaminationMode mode = ContaminationMode::both;
  double noise_std = 6.0;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  std::size_t predict_mc = 50;

  void validate() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct CellResult {
  std::string method;
  std::string contamination;
  double fraction = 0.0;
  /// "rmse" or "accuracy".
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> values;
  double test_log_likelihood = 0.0;
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  /// Power used in each repetition (cross-validated or fixed); empty for KL.
  std::vector<double> hyperparameter;
};

struct ExperimentReport {
  std::string name;
  std::string source;
  bool surrogate = false;
  std::vector<CellResult> cells;

  nlohmann::json to_json() const;
  /// One row per cell.
  std::string to_csv() const;
};

/// Data for one repetition before contamination: standardized train and
/// test splits plus the standardizer that produced them.
struct PreparedData {
  Dataset train;
  Dataset test;
  std::optional<Standardizer> standardizer;
};

/// Loads or generates the source (surrogates use `source_seed`), then
/// subsamples, splits and standardizes with `split_seed`. Toy sources are
/// generated from `split_seed`; `with_outliers` picks the generator variant
/// and the test set is always clean.
PreparedData prepare_data(const DataConfig& config, std::uint64_t source_seed, std::uint64_t split_seed,
                          bool with_outliers);

struct Evaluation {
  std::string metric;
  double value = 0.0;
  double test_log_likelihood = 0.0;
};

/// RMSE in original target units (against noise-free targets when known) or
/// accuracy, plus mean log predictive density.
Evaluation evaluate(const MeanFieldGaussian& q, const Problem& problem, const PreparedData& data,
                    std::size_t predict_mc, std::uint64_t seed);

ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace rvi
