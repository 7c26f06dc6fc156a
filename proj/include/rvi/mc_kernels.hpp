#pragma once

// Monte Carlo expectations over q and their derivatives with respect to the
// variational parameters. Every draw gets its own tape; the parallel path
// distributes draws over OpenMP threads and reduces in draw order, so both
// paths return bit-identical results.

#include <functional>
#include <span>
#include <vector>

#include "rvi/objectives.hpp"

namespace rvi {

enum class Execution { serial, parallel };

enum class HessianScope { means, means_and_scales };

/// Everything that defines the variational objective apart from data and q.
struct Problem {
  NetworkSpec net;
  LikelihoodSpec lik;
  PriorSpec prior;
  DivergenceConfig divergence;

  void validate() const;
};

/// Fixed standard-normal draws, one row of length `dim` per sample.
struct NoiseDraws {
  std::size_t samples = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  static NoiseDraws draw(std::size_t samples, std::size_t dim, Rng& rng);
  Tensor row(std::size_t k) const;
};

/// Scalar functional of one parameter draw. Must be safe to call concurrently.
using SampleFn = std::function<Tensor(const Tensor& theta, std::size_t k)>;

struct ExpectationGradient {
  double value = 0.0;
  std::vector<double> grad_m;
  std::vector<double> grad_s;
};

/// (1/S) sum_k fn(m + exp(s) eps_k) and its gradient in (m, s).
ExpectationGradient expectation_gradient(const MeanFieldGaussian& q, const NoiseDraws& draws,
                                         const SampleFn& fn, Execution exec);

/// Hessian of the same average times v. With HessianScope::means, v has
/// length dim; otherwise 2*dim ordered (m, s).
std::vector<double> expectation_hvp(const MeanFieldGaussian& q, const NoiseDraws& draws,
                                    const SampleFn& fn, std::span<const double> v, HessianScope scope,
                                    Execution exec);

struct ObjectiveGradient {
  double value = 0.0;
  double kl = 0.0;
  double data_term = 0.0;
  std::vector<double> grad_m;
  std::vector<double> grad_s;
};

/// KL(q || prior) + w * (1/S) sum_k d(theta_k) on `batch`.
ObjectiveGradient objective_and_gradient(const Problem& problem, const MeanFieldGaussian& q,
                                         const Batch& batch, const NoiseDraws& draws, Execution exec);

std::vector<double> objective_hvp(const Problem& problem, const MeanFieldGaussian& q, const Batch& batch,
                                  const NoiseDraws& draws, std::span<const double> v,
                                  HessianScope scope, Execution exec);

/// Runs body(i) for i in [0, n), over OpenMP threads when exec is parallel.
/// The first exception thrown by any iteration is rethrown on the caller.
void parallel_for(std::size_t n, Execution exec, const std::function<void(std::size_t)>& body);

/// Number of OpenMP threads the parallel path will use.
int max_threads();
void set_threads(int n);

}  // namespace rvi
