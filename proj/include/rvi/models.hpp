#pragma once

// Network architectures and output likelihoods.
//
// Shapes: inputs are [B, D], network outputs f are [B, K], targets are [B, K].
// Per-point quantities come back as [B].

#include <cstddef>
#include <string>
#include <vector>

#include "rvi/tensor.hpp"

namespace rvi {

enum class Activation { linear, relu, tanh };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct NetworkSpec {
  /// Input width first, output width last. An input width of 0 gives a
  /// bias-only model (used for unsupervised densities).
  std::vector<std::size_t> widths;
  Activation activation = Activation::relu;

  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  static NetworkSpec linear(std::size_t in, std::size_t out = 1);
  static NetworkSpec mlp(std::vector<std::size_t> widths, Activation activation);

  void validate() const;
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  /// Weights are stored [in, out] row-major, before the bias of the same layer.
  std::vector<Layer> layers() const;
  std::size_t param_count() const;
};

/// f = A_L(act(... act(A_1(x)))) with A_l(h) = h W_l + b_l. Returns [B, K].
Tensor forward(const NetworkSpec& net, const Tensor& theta, const Tensor& x);

enum class LikelihoodKind { gaussian, logistic, robust_logistic, student_t, gaussian_density };

const char* likelihood_name(LikelihoodKind k);
LikelihoodKind parse_likelihood(const std::string& name);

struct LikelihoodSpec {
  LikelihoodKind kind = LikelihoodKind::gaussian;
  double sigma = 1.0;    // gaussian, student_t, gaussian_density
  double epsilon = 0.0;  // robust_logistic
  double nu = 3.0;       // student_t

  static LikelihoodSpec gaussian(double sigma = 1.0);
  static LikelihoodSpec logistic();
  static LikelihoodSpec robust_logistic(double epsilon);
  static LikelihoodSpec student_t(double nu, double sigma = 1.0);
  static LikelihoodSpec gaussian_density(double sigma = 1.0);

  void validate() const;
  bool binary() const {
    return kind == LikelihoodKind::logistic || kind == LikelihoodKind::robust_logistic;
  }
};

/// ln p(y | f) per point, summed over output dimensions. [B]
Tensor log_likelihood(const LikelihoodSpec& lik, const Tensor& f, const Tensor& y);

/// p(y | f)^kappa per point, evaluated as exp(kappa * ln p). [B]
Tensor power_density(const LikelihoodSpec& lik, const Tensor& f, const Tensor& y, double kappa);

/// Integral of p(y | f)^exponent over y, per point. [B]
/// Gaussian kinds give a constant (no dependence on f). Student-t is only
/// defined for exponent 1.
Tensor power_integral(const LikelihoodSpec& lik, const Tensor& f, double exponent);

/// power_integral(lik, f, 1 + gamma)^(gamma / (1 + gamma)). [B]
Tensor gamma_normalizer(const LikelihoodSpec& lik, const Tensor& f, double gamma);

/// Checks targets against the likelihood's support ({0,1} for binary kinds).
void validate_targets(const LikelihoodSpec& lik, const Tensor& y);

}  // namespace rvi
