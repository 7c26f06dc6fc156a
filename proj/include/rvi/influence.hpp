#pragma once

// Influence of data contamination on the variational means.
//
// With G_eps = (1 - eps) G_n + eps * Delta_z the stationarity condition of the
// objective gives dm*/deps = -(H + damping I)^-1 g, where H is the Hessian of
// the objective in m and g = w * d/dm E_q[d(z) - d_data]. All expectations use
// fixed standard-normal draws so repeated queries share random numbers.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rvi/mc_kernels.hpp"

namespace rvi {

struct InfluenceOptions {
  std::size_t gradient_mc = 200;
  std::size_t hessian_mc = 200;
  /// Reuse the Hessian draws for gradients (common random numbers).
  bool share_draws = false;
  double damping = 1e-3;
  /// When above `damping`, a solve that does not converge (or meets negative
  /// curvature) is retried with ten times the damping, up to this value.
  double max_damping = 0.0;
  double cg_tol = 1e-6;
  std::size_t cg_max_iter = 2000;
  HessianScope scope = HessianScope::means;
  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;

  void validate() const;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  /// ||A x - b|| / ||b|| recomputed from a final product.
  double residual = 0.0;
  bool converged = false;
  /// Set when a non-positive curvature direction stopped the iteration.
  bool indefinite = false;
  /// Damping of the accepted solve.
  double damping = 0.0;
};

using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;

/// Solves A x = b for symmetric positive definite A, starting from x = 0.
CgResult conjugate_gradient(const LinearOperator& apply, std::span<const double> b, double tol,
                            std::size_t max_iter);

/// A new point z = (x, y). For unsupervised densities x is empty and y holds the observation.
struct AddPoint {
  std::vector<double> x;
  std::vector<double> y;
};
/// Moves feature `feature` of training point `index`.
struct PerturbInput {
  std::size_t index = 0;
  std::size_t feature = 0;
};
/// Replaces the binary label of training point `index` by its complement.
struct LabelFlip {
  std::size_t index = 0;
};
using Contamination = std::variant<AddPoint, PerturbInput, LabelFlip>;

std::string contamination_label(const Contamination& c);

/// Fitted posterior plus the fixed draws and cached data gradient that every
/// query against it reuses. Read-only after construction.
class InfluenceContext {
 public:
  InfluenceContext(Problem problem, MeanFieldGaussian q, Batch data, InfluenceOptions options = {});

  const Problem& problem() const { return problem_; }
  const MeanFieldGaussian& q() const { return q_; }
  const Batch& data() const { return data_; }
  const InfluenceOptions& options() const { return options_; }
  const NoiseDraws& gradient_draws() const {
    return options_.share_draws ? hessian_draws_ : own_gradient_draws_;
  }
  const NoiseDraws& hessian_draws() const { return hessian_draws_; }

  /// Length of influence vectors: dim(m), or 2 dim(m) when scales are included.
  std::size_t dim() const;

  /// (H + damping I) v, with the configured damping unless one is given.
  std::vector<double> damped_hvp(std::span<const double> v) const;
  std::vector<double> damped_hvp(std::span<const double> v, double damping) const;
  CgResult solve(std::span<const double> b) const;

  /// Gradient of E_q[fn(theta)] packed to the context's scope.
  std::vector<double> expected_gradient(const SampleFn& fn) const;

  /// d/dm E_q[d_data] over the whole training set (cached).
  const std::vector<double>& data_gradient() const { return data_gradient_; }
  /// Norm of the objective gradient in m; near zero at a stationary point.
  double stationarity() const { return stationarity_; }

 private:
  Problem problem_;
  MeanFieldGaussian q_;
  Batch data_;
  InfluenceOptions options_;
  NoiseDraws hessian_draws_;
  NoiseDraws own_gradient_draws_;
  std::vector<double> data_gradient_;
  double stationarity_ = 0.0;
};

/// g = w * d/dm E_q[d(contaminated) - d(data)] via the per-point decomposition
/// of additive divergences (KL, beta, transformed gamma).
std::vector<double> outlier_gradient(const InfluenceContext& ctx, const Contamination& c);

/// The same derivative taken as d/deps of the weighted objective with eps on
/// the tape. Works for every divergence, including the non-additive original gamma.
std::vector<double> outlier_gradient_generic(const InfluenceContext& ctx, const Contamination& c);

struct InfluenceResult {
  std::vector<double> if_vector;
  std::vector<double> gradient;
  CgResult cg;
};

/// -(H + damping I)^-1 g for a given g.
InfluenceResult influence_from_gradient(const InfluenceContext& ctx, std::vector<double> g);
/// Dispatches to the additive or generic gradient as the divergence requires.
InfluenceResult influence_vector(const InfluenceContext& ctx, const Contamination& c);

/// d/dm E_q[ln p(y | x, theta)] averaged over the rows of `test`.
std::vector<double> test_gradient(const InfluenceContext& ctx, const Batch& test);

double predictive_influence(std::span<const double> test_grad, std::span<const double> if_vector);
/// Computes the test gradient and returns its product with if_vector.
double predictive_influence(const InfluenceContext& ctx, std::span<const double> if_vector,
                            const Batch& test);

enum class SweepAxis { input, output };

struct SweepSpec {
  std::size_t base_index = 0;
  SweepAxis axis = SweepAxis::output;
  std::size_t feature = 0;
  std::vector<double> magnitudes;
  Batch test;
};

struct SweepPoint {
  std::string method;
  std::string axis;
  double magnitude = 0.0;
  /// Full predictive influence, including the fixed data term of g.
  double predictive_influence = 0.0;
  /// Part contributed by the moved point alone: -w * s . d/dm E_q[d(z)].
  double point_influence = 0.0;
  /// log10 |point_influence|, accumulated in log space so that vanishing
  /// density powers do not underflow.
  double log10_abs_point_influence = 0.0;
  double cg_residual = 0.0;
  double damping = 0.0;
};

/// Signed magnitudes +-{1, 10, ..., 1e6} together with `original`, sorted.
std::vector<double> default_sweep_grid(double original);

/// Moves one coordinate of a training point over spec.magnitudes and records
/// the predictive influence on spec.test for every context (one per method).
std::vector<SweepPoint> outlier_sweep(std::span<const InfluenceContext* const> methods,
                                      const SweepSpec& spec);

struct LabelFlipSummary {
  std::string method;
  /// (1/N) mean_i [ (1/N_test) sum_j d/deps_i E_q ln p(y_j | x_j, theta) ].
  double average = 0.0;
  double cg_residual = 0.0;
  double damping = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

LabelFlipSummary label_flip_average(const InfluenceContext& ctx, const Batch& test);

/// Everything one query produces, for reports.
struct InfluenceReport {
  std::string method;
  std::string contamination;
  std::vector<double> if_vector;
  std::vector<double> predictive_scalars;
  std::vector<SweepPoint> sweep;
  double cg_residual = 0.0;
  std::size_t cg_iterations = 0;
  double damping = 0.0;
  double stationarity = 0.0;
};

}  // namespace rvi
