#pragma once

// Training, prediction and cross-validation for mean-field Gaussian VI.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rvi/mc_kernels.hpp"

namespace rvi {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t mc_samples = 5;
  std::size_t batch_size = 128;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  Execution execution = Execution::serial;

  void validate() const;
};

struct AdamState {
  std::vector<double> first;
  std::vector<double> second;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr);

struct FitResult {
  MeanFieldGaussian q;
  /// Mean objective value over the steps of each epoch.
  std::vector<double> trace;
};

/// Minibatch Adam on the variational objective with fresh draws every step.
FitResult fit(const Problem& problem, const Batch& data, const TrainConfig& train);
FitResult fit(const Problem& problem, const Batch& data, const TrainConfig& train,
              MeanFieldGaussian initial);

/// Rows `index` of a batch.
Batch take_rows(const Batch& data, std::span<const std::size_t> index);

struct Prediction {
  /// Posterior-averaged f, [B * K] row-major. For binary likelihoods this is
  /// the averaged P(y = 1).
  std::vector<double> mean;
  /// ln((1/S) sum_k p(y | x, theta_k)) per point; empty without targets.
  std::vector<double> log_mean_likelihood;
  /// (1/S) sum_k ln p(y | x, theta_k) per point; empty without targets.
  std::vector<double> mean_log_likelihood;
};

Prediction predict(const MeanFieldGaussian& q, const NetworkSpec& net, const LikelihoodSpec& lik,
                   const Tensor& inputs, const Tensor* targets, std::size_t mc_samples, Rng& rng);

double rmse(std::span<const double> predicted, std::span<const double> target);
/// Fraction of points where (p >= 0.5) matches the label.
double accuracy(std::span<const double> prob_one, std::span<const double> labels);

struct CvResult {
  double best = 0.0;
  std::vector<double> grid;
  /// Mean validation RMSE (regression) or accuracy (binary), per grid value.
  std::vector<double> scores;
  bool higher_is_better = false;
};

/// K-fold cross-validation of the divergence power. Ties go to the smaller
/// value, then to the earlier grid entry.
CvResult cross_validate(std::span<const double> grid, std::size_t folds, const Problem& base,
                        const Batch& data, const TrainConfig& train, std::size_t predict_mc = 20);

}  // namespace rvi
