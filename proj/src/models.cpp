#include "rvi/models.hpp"

#include <cmath>
#include <numbers>

namespace rvi {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

NetworkSpec NetworkSpec::linear(std::size_t in, std::size_t out) {
  return NetworkSpec{{in, out}, Activation::linear};
}

NetworkSpec NetworkSpec::mlp(std::vector<std::size_t> widths, Activation activation) {
  NetworkSpec net{std::move(widths), activation};
  net.validate();
  return net;
}

void NetworkSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("network needs at least an input and an output width");
  for (std::size_t i = 1; i < widths.size(); ++i) {
    if (widths[i] == 0) throw ConfigError("network widths after the input must be positive");
  }
}

std::vector<NetworkSpec::Layer> NetworkSpec::layers() const {
  std::vector<Layer> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer{widths[l], widths[l + 1], offset, offset + widths[l] * widths[l + 1]};
    offset = layer.bias_offset + layer.out;
    out.push_back(layer);
  }
  return out;
}

std::size_t NetworkSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

Tensor forward(const NetworkSpec& net, const Tensor& theta, const Tensor& x) {
  net.validate();
  if (theta.size() != net.param_count()) {
    throw ShapeError("theta has " + std::to_string(theta.size()) + " entries, network needs " +
                     std::to_string(net.param_count()));
  }
  Tensor h = x.rank() == 1 ? reshape(x, {1, x.size()}) : x;
  if (h.rank() != 2 || h.shape()[1] != net.input_dim()) {
    throw ShapeError("input " + shape_string(x.shape()) + " does not match network input width " +
                     std::to_string(net.input_dim()));
  }
  const std::size_t batch = h.shape()[0];
  const auto layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const Tensor b = slice(theta, L.bias_offset, L.out);
    if (L.in == 0) {
      h = broadcast_to(b, {batch, L.out});
    } else {
      const Tensor W = reshape(slice(theta, L.weight_offset, L.in * L.out), {L.in, L.out});
      h = matmul(h, W) + b;
    }
    if (l + 1 < layers.size()) {
      if (net.activation == Activation::relu) h = relu(h);
      if (net.activation == Activation::tanh) h = tanh(h);
    }
  }
  return h;
}

const char* likelihood_name(LikelihoodKind k) {
  switch (k) {
    case LikelihoodKind::gaussian: return "gaussian";
    case LikelihoodKind::logistic: return "logistic";
    case LikelihoodKind::robust_logistic: return "robust_logistic";
    case LikelihoodKind::student_t: return "student_t";
    case LikelihoodKind::gaussian_density: return "gaussian_density";
  }
  return "?";
}

LikelihoodKind parse_likelihood(const std::string& name) {
  for (auto k : {LikelihoodKind::gaussian, LikelihoodKind::logistic, LikelihoodKind::robust_logistic,
                 LikelihoodKind::student_t, LikelihoodKind::gaussian_density}) {
    if (name == likelihood_name(k)) return k;
  }
  throw ConfigError("unknown likelihood '" + name + "'");
}

LikelihoodSpec LikelihoodSpec::gaussian(double sigma) {
  LikelihoodSpec s;
  s.kind = LikelihoodKind::gaussian;
  s.sigma = sigma;
  s.validate();
  return s;
}

LikelihoodSpec LikelihoodSpec::logistic() {
  LikelihoodSpec s;
  s.kind = LikelihoodKind::logistic;
  return s;
}

LikelihoodSpec LikelihoodSpec::robust_logistic(double epsilon) {
  LikelihoodSpec s;
  s.kind = LikelihoodKind::robust_logistic;
  s.epsilon = epsilon;
  s.validate();
  return s;
}

LikelihoodSpec LikelihoodSpec::student_t(double nu, double sigma) {
  LikelihoodSpec s;
  s.kind = LikelihoodKind::student_t;
  s.nu = nu;
  s.sigma = sigma;
  s.validate();
  return s;
}

LikelihoodSpec LikelihoodSpec::gaussian_density(double sigma) {
  LikelihoodSpec s = gaussian(sigma);
  s.kind = LikelihoodKind::gaussian_density;
  return s;
}

void LikelihoodSpec::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("likelihood sigma must be positive");
  if (kind == LikelihoodKind::robust_logistic && !(epsilon >= 0.0 && epsilon < 0.5)) {
    throw ConfigError("robust_logistic epsilon must lie in [0, 0.5)");
  }
  if (kind == LikelihoodKind::student_t && !(nu > 2.0)) {
    throw ConfigError("student_t degrees of freedom must exceed 2");
  }
}

void validate_targets(const LikelihoodSpec& lik, const Tensor& y) {
  if (!lik.binary()) return;
  for (double v : y.values()) {
    if (v != 0.0 && v != 1.0) throw ConfigError("binary likelihood needs targets in {0, 1}");
  }
}

namespace {

void check_pair(const Tensor& f, const Tensor& y) {
  if (f.rank() != 2 || f.shape() != y.shape()) {
    throw ShapeError("likelihood expects f and y of equal [B, K] shape, got " +
                     shape_string(f.shape()) + " and " + shape_string(y.shape()));
  }
}

void check_single_output(const LikelihoodSpec& lik, const Tensor& f) {
  if (f.rank() != 2 || f.shape()[1] != 1) {
    throw ShapeError(std::string(likelihood_name(lik.kind)) + " likelihood needs one output column");
  }
}

// P(y = 1 | f) in log form for the binary kinds.
Tensor log_prob_one(const LikelihoodSpec& lik, const Tensor& f) {
  if (lik.kind == LikelihoodKind::robust_logistic && lik.epsilon > 0.0) {
    return log(lik.epsilon + (1.0 - 2.0 * lik.epsilon) * sigmoid(f));
  }
  return log_sigmoid(f);
}

}  // namespace

Tensor log_likelihood(const LikelihoodSpec& lik, const Tensor& f, const Tensor& y) {
  check_pair(f, y);
  switch (lik.kind) {
    case LikelihoodKind::gaussian:
    case LikelihoodKind::gaussian_density: {
      const double k = static_cast<double>(f.shape()[1]);
      const double c = -0.5 * k * std::log(2.0 * std::numbers::pi * lik.sigma * lik.sigma);
      const Tensor r = (y.detach() - f) / lik.sigma;
      return c - 0.5 * sum_last(square(r));
    }
    case LikelihoodKind::logistic:
    case LikelihoodKind::robust_logistic: {
      check_single_output(lik, f);
      validate_targets(lik, y);
      // Sign flip s = 2y - 1 maps both labels onto P(y = 1 | s f).
      std::vector<double> sign(y.size());
      for (std::size_t i = 0; i < sign.size(); ++i) sign[i] = 2.0 * y[i] - 1.0;
      const Tensor sf = f * Tensor(y.shape(), std::move(sign));
      return sum_last(log_prob_one(lik, sf));
    }
    case LikelihoodKind::student_t: {
      const double nu = lik.nu, s = lik.sigma;
      const double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                       0.5 * std::log(nu * std::numbers::pi * s * s);
      const Tensor r = y.detach() - f;
      const double k = static_cast<double>(f.shape()[1]);
      return k * c - 0.5 * (nu + 1.0) * sum_last(log(1.0 + square(r) / (nu * s * s)));
    }
  }
  throw std::logic_error("log_likelihood: unknown kind");
}

Tensor power_density(const LikelihoodSpec& lik, const Tensor& f, const Tensor& y, double kappa) {
  return exp(kappa * log_likelihood(lik, f, y));
}

Tensor power_integral(const LikelihoodSpec& lik, const Tensor& f, double exponent) {
  if (!(exponent > 0.0)) throw ConfigError("power_integral exponent must be positive");
  if (f.rank() != 2) throw ShapeError("power_integral expects f of shape [B, K]");
  const std::size_t batch = f.shape()[0];
  switch (lik.kind) {
    case LikelihoodKind::gaussian:
    case LikelihoodKind::gaussian_density: {
      const double s2 = lik.sigma * lik.sigma;
      const double per_dim =
          std::pow(exponent, -0.5) * std::pow(2.0 * std::numbers::pi * s2, 0.5 * (1.0 - exponent));
      return Tensor::full({batch}, std::pow(per_dim, static_cast<double>(f.shape()[1])));
    }
    case LikelihoodKind::logistic:
    case LikelihoodKind::robust_logistic: {
      check_single_output(lik, f);
      const Tensor one = sum_last(log_prob_one(lik, f));
      const Tensor zero = sum_last(log_prob_one(lik, -f));
      return exp(exponent * one) + exp(exponent * zero);
    }
    case LikelihoodKind::student_t:
      if (exponent == 1.0) return Tensor::full({batch}, 1.0);
      throw UnsupportedError("student_t likelihood has no power integral for exponent != 1");
  }
  throw std::logic_error("power_integral: unknown kind");
}

Tensor gamma_normalizer(const LikelihoodSpec& lik, const Tensor& f, double gamma) {
  if (gamma == 0.0) return Tensor::full({f.shape().at(0)}, 1.0);
  return pow(power_integral(lik, f, 1.0 + gamma), gamma / (1.0 + gamma));
}

}  // namespace rvi
