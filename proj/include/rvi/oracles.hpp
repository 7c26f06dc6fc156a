#pragma once

// Brute-force references used to validate the variational machinery:
// grid-normalized pseudo-posteriors, retraining-based influence estimates,
// numeric power integrals and a Monte Carlo check of the weighted score.

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "rvi/influence.hpp"

namespace rvi {

/// Uniform grid over one or two parameters.
struct QuadratureGrid {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t points = 2001;

  void validate() const;
  std::size_t dims() const { return lower.size(); }
  /// Same box with 2 * points - 1 nodes per axis.
  QuadratureGrid refined() const;
};

/// Models with closed-form per-point densities and at most two parameters.
enum class OracleModel {
  /// x ~ N(mu, sigma^2); theta = (mu).
  gaussian_mean,
  /// y | x ~ N(w x + b, sigma^2); theta = (w, b).
  linear_regression,
};

struct OracleData {
  /// Inputs; unused by gaussian_mean.
  std::vector<double> x;
  /// Observations or regression targets.
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

struct PseudoPosterior {
  std::vector<std::vector<double>> axes;
  /// Normalized density, row-major over (axes[0], axes[1]).
  std::vector<double> density;
  std::vector<double> mean;
  std::vector<double> std;
  /// Fraction of mass outside the box, estimated on a widened grid.
  double outside_mass = 0.0;
};

/// Normalizes exp(-w d(theta)) prior(theta) on the grid by the trapezoid rule.
/// Throws NumericError when more than 1e-8 of the mass lies outside the box.
PseudoPosterior pseudo_posterior_quadrature(OracleModel model, double sigma, const OracleData& data,
                                            const DivergenceConfig& divergence, const PriorSpec& prior,
                                            const QuadratureGrid& grid);

/// Integral of p(y | f)^exponent over y for one output. Continuous likelihoods
/// use a sinh-mapped trapezoid rule; binary ones sum over both labels.
double quadrature_power_integral(const LikelihoodSpec& lik, double f, double exponent);

struct RetrainOptions {
  /// Contamination levels, multiplied by 1/N.
  std::vector<double> scaled_eps{1e-2, 5e-3, 1e-3};
  double grad_tol = 1e-9;
  std::size_t max_iter = 50000;
  /// Also refit the raw scales; influence estimates then cover (m, s).
  bool refit_scales = false;
  Execution execution = Execution::parallel;
};

struct RetrainResult {
  /// Refit at eps = 0.
  MeanFieldGaussian base;
  std::vector<double> eps;
  /// (m*(eps) - m*(0)) / eps, one row per eps.
  std::vector<std::vector<double>> estimates;
  /// Intercept of a least-squares line through the estimates in eps.
  std::vector<double> extrapolated;
  double base_grad_norm = 0.0;
  std::size_t iterations = 0;
};

struct RefitResult {
  MeanFieldGaussian q;
  double value = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
};

/// Full-batch gradient descent with Barzilai-Borwein steps on the objective
/// with contamination weight eps and fixed draws. Throws NumericError when the
/// gradient norm does not reach options.grad_tol.
RefitResult refit_contaminated(const Problem& problem, const Batch& data, const MeanFieldGaussian& start,
                               const Contamination* contamination, double eps, const NoiseDraws& draws,
                               const RetrainOptions& options);

/// Finite-difference influence of `contamination` on the fitted means.
RetrainResult retrain_if_oracle(const Problem& problem, const Batch& data, const MeanFieldGaussian& start,
                                const Contamination& contamination, const NoiseDraws& draws,
                                const RetrainOptions& options = {});

struct EstimatingEquationResult {
  /// Components for (mu, sigma).
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t samples = 0;
};

/// Draws x ~ N(mu_true, sigma_true^2) and averages
/// p(x; theta)^beta score(x; theta) - int p^(1+beta) score dx at theta = eval
/// (theta_true when absent).
EstimatingEquationResult estimating_equation_check(double mu_true, double sigma_true, double beta,
                                                   std::size_t n_mc, std::uint64_t seed,
                                                   std::optional<std::pair<double, double>> eval = {});

nlohmann::json to_json(const PseudoPosterior& p, bool include_density = false);
nlohmann::json to_json(const RetrainResult& r);
nlohmann::json to_json(const EstimatingEquationResult& r);

}  // namespace rvi
