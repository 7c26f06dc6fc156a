#pragma once

// Empirical cross-entropies (KL, beta, gamma) and the variational objective
// KL(q || prior) + w * E_q[d(theta)], with w = N unless overridden.

#include <optional>
#include <string>

#include "rvi/models.hpp"
#include "rvi/variational.hpp"

namespace rvi {

enum class DivergenceKind { kl, beta, gamma_transformed, gamma_original };

const char* divergence_name(DivergenceKind k);
DivergenceKind parse_divergence(const std::string& name);

struct DivergenceConfig {
  DivergenceKind kind = DivergenceKind::kl;
  /// beta or gamma; unused for KL.
  double power = 0.0;
  std::size_t n_total = 1;
  /// Multiplier of the data term. Defaults to n_total.
  std::optional<double> data_weight;

  static DivergenceConfig kl(std::size_t n);
  static DivergenceConfig beta(double beta, std::size_t n);
  static DivergenceConfig gamma_transformed(double gamma, std::size_t n);
  static DivergenceConfig gamma_original(double gamma, std::size_t n);

  void validate() const;
  double weight() const { return data_weight.value_or(static_cast<double>(n_total)); }
  /// Whether the data term is a plain average over points.
  bool additive() const { return kind != DivergenceKind::gamma_original; }
  /// "KL", "beta=0.1", "gamma=0.5", "gamma_original=0.5".
  std::string label() const;
  DivergenceConfig with_power(double p) const;
};

/// Inputs [B, D] and targets [B, K]. Unsupervised densities use D = 0 and
/// put the observations in targets.
struct Batch {
  Tensor inputs;
  Tensor targets;

  std::size_t size() const { return targets.shape().empty() ? 0 : targets.shape()[0]; }
  void validate(const NetworkSpec& net) const;
};

/// ln p(y_i | x_i, theta) for each row. [B]
Tensor point_log_likelihood(const LikelihoodSpec& lik, const NetworkSpec& net, const Tensor& theta,
                            const Batch& batch);

Tensor cross_entropy_kl(const LikelihoodSpec& lik, const NetworkSpec& net, const Tensor& theta,
                        const Batch& batch);
Tensor cross_entropy_beta(const LikelihoodSpec& lik, const NetworkSpec& net, const Tensor& theta,
                          const Batch& batch, double beta);
Tensor cross_entropy_gamma_transformed(const LikelihoodSpec& lik, const NetworkSpec& net,
                                       const Tensor& theta, const Batch& batch, double gamma);
/// Not additive over points: `batch` must hold all n_total points.
Tensor cross_entropy_gamma_original(const LikelihoodSpec& lik, const NetworkSpec& net,
                                    const Tensor& theta, const Batch& batch, double gamma,
                                    std::size_t n_total);

/// Dispatches on config.kind with uniform weights over the batch.
Tensor cross_entropy(const DivergenceConfig& config, const LikelihoodSpec& lik, const NetworkSpec& net,
                     const Tensor& theta, const Batch& batch);

/// Same estimators with explicit point weights (summing to one). Weights may
/// be tape tensors. No batch-size restriction applies here.
Tensor weighted_cross_entropy(const DivergenceConfig& config, const LikelihoodSpec& lik,
                              const NetworkSpec& net, const Tensor& theta, const Batch& batch,
                              const Tensor& weights);

/// Cross-entropy from precomputed per-point log-likelihoods and outputs.
/// `weights` null means the batch mean.
Tensor cross_entropy_from_points(const DivergenceConfig& config, const LikelihoodSpec& lik,
                                 const Tensor& log_lik, const Tensor& f, const Tensor* weights);

/// KL(q || prior) + w * (1/S) sum_k d(theta_k) with fresh reparameterized draws.
/// m and s are normally tape variables.
Tensor variational_objective(const Tensor& m, const Tensor& s, const PriorSpec& prior,
                             const LikelihoodSpec& lik, const NetworkSpec& net, const Batch& batch,
                             const DivergenceConfig& config, std::size_t mc_samples, Rng& rng);
double variational_objective(const MeanFieldGaussian& q, const PriorSpec& prior,
                             const LikelihoodSpec& lik, const NetworkSpec& net, const Batch& batch,
                             const DivergenceConfig& config, std::size_t mc_samples, Rng& rng);

}  // namespace rvi
