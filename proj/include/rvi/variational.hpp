#pragma once

// Mean-field Gaussian family q(theta) = N(m, diag(exp(s))^2) and its prior.

#include <cstdint>
#include <random>
#include <vector>

#include "rvi/tensor.hpp"

namespace rvi {

using Rng = std::mt19937_64;

struct MeanFieldGaussian {
  std::vector<double> means;
  std::vector<double> raw_scales;

  /// m ~ N(0, 0.1^2), s = log(0.05).
  static MeanFieldGaussian initialize(std::size_t dim, Rng& rng);
  static MeanFieldGaussian point_mass(std::vector<double> means, double raw_scale = -30.0);

  std::size_t dim() const { return means.size(); }
  std::vector<double> stds() const;
  void validate(std::size_t expected_dim) const;
};

struct PriorSpec {
  std::vector<double> mean;
  std::vector<double> std;

  static PriorSpec standard(std::size_t dim);
  void validate(std::size_t expected_dim) const;
};

/// Standard-normal draws, `count` rows of length `dim`, row-major.
std::vector<double> standard_normal(std::size_t count, std::size_t dim, Rng& rng);

/// theta = m + exp(s) * eps. m and s may be tape variables.
Tensor sample_theta(const Tensor& m, const Tensor& s, const Tensor& eps);
Tensor sample_theta(const Tensor& m, const Tensor& s, Rng& rng);

/// Closed-form KL(q || p) for diagonal Gaussians.
Tensor kl_q_prior(const Tensor& m, const Tensor& s, const PriorSpec& prior);
double kl_q_prior(const MeanFieldGaussian& q, const PriorSpec& prior);

}  // namespace rvi
