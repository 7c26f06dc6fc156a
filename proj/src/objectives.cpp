#include "rvi/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rvi {

const char* divergence_name(DivergenceKind k) {
  switch (k) {
    case DivergenceKind::kl: return "kl";
    case DivergenceKind::beta: return "beta";
    case DivergenceKind::gamma_transformed: return "gamma";
    case DivergenceKind::gamma_original: return "gamma_original";
  }
  return "?";
}

DivergenceKind parse_divergence(const std::string& name) {
  if (name == "kl" || name == "KL") return DivergenceKind::kl;
  if (name == "beta") return DivergenceKind::beta;
  if (name == "gamma" || name == "gamma_transformed") return DivergenceKind::gamma_transformed;
  if (name == "gamma_original") return DivergenceKind::gamma_original;
  throw ConfigError("unknown divergence '" + name + "'");
}

DivergenceConfig DivergenceConfig::kl(std::size_t n) {
  DivergenceConfig c;
  c.n_total = n;
  c.validate();
  return c;
}

DivergenceConfig DivergenceConfig::beta(double beta, std::size_t n) {
  DivergenceConfig c{DivergenceKind::beta, beta, n, std::nullopt};
  c.validate();
  return c;
}

DivergenceConfig DivergenceConfig::gamma_transformed(double gamma, std::size_t n) {
  DivergenceConfig c{DivergenceKind::gamma_transformed, gamma, n, std::nullopt};
  c.validate();
  return c;
}

DivergenceConfig DivergenceConfig::gamma_original(double gamma, std::size_t n) {
  DivergenceConfig c{DivergenceKind::gamma_original, gamma, n, std::nullopt};
  c.validate();
  return c;
}

void DivergenceConfig::validate() const {
  if (n_total < 1) throw ConfigError("n_total must be at least 1");
  if (kind != DivergenceKind::kl && !(power > 0.0 && power <= 1.0)) {
    throw ConfigError(std::string(divergence_name(kind)) + " power must lie in (0, 1]");
  }
  if (data_weight && !(*data_weight > 0.0)) throw ConfigError("data weight must be positive");
}

std::string DivergenceConfig::label() const {
  if (kind == DivergenceKind::kl) return "KL";
  std::ostringstream os;
  os << divergence_name(kind) << '=' << power;
  return os.str();
}

DivergenceConfig DivergenceConfig::with_power(double p) const {
  DivergenceConfig c = *this;
  c.power = p;
  c.validate();
  return c;
}

void Batch::validate(const NetworkSpec& net) const {
  if (inputs.rank() != 2 || targets.rank() != 2) throw ShapeError("batch tensors must be [B, D] and [B, K]");
  if (inputs.shape()[0] != targets.shape()[0]) throw ShapeError("batch inputs and targets differ in rows");
  if (inputs.shape()[1] != net.input_dim()) throw ShapeError("batch input width does not match network");
  if (targets.shape()[1] != net.output_dim()) throw ShapeError("batch target width does not match network");
  if (size() == 0) throw ConfigError("empty batch");
}

Tensor point_log_likelihood(const LikelihoodSpec& lik, const NetworkSpec& net, const Tensor& theta,
                            const Batch& batch) {
  batch.validate(net);
  return log_likelihood(lik, forward(net, theta, batch.inputs), batch.targets);
}

namespace {

Tensor average(const Tensor& per_point, const Tensor* weights) {
  return weights == nullptr ? mean(per_point) : sum(per_point * *weights);
}

}  // namespace

Tensor cross_entropy_from_points(const DivergenceConfig& config, const LikelihoodSpec& lik,
                                 const Tensor& log_lik, const Tensor& f, const Tensor* weights) {
  if (weights != nullptr && weights->size() != log_lik.size()) {
    throw ShapeError("cross-entropy weights do not match the batch");
  }
  const double p = config.power;
  switch (config.kind) {
    case DivergenceKind::kl:
      return -average(log_lik, weights);
    case DivergenceKind::beta:
      return -((p + 1.0) / p) * average(exp(p * log_lik), weights) +
             average(power_integral(lik, f, 1.0 + p), weights);
    case DivergenceKind::gamma_transformed:
      return -((p + 1.0) / p) * average(exp(p * log_lik) / gamma_normalizer(lik, f, p), weights);
    case DivergenceKind::gamma_original: {
      // log of the weighted mean of exp(p * l), shifted by its largest exponent.
      const auto vals = log_lik.values();
      const double shift = p * *std::max_element(vals.begin(), vals.end());
      const Tensor log_mean = shift + log(average(exp(p * log_lik - shift), weights));
      return -(1.0 / p) * log_mean +
             (1.0 / (1.0 + p)) * average(log(power_integral(lik, f, 1.0 + p)), weights);
    }
  }
  throw std::logic_error("cross_entropy: unknown divergence");
}

Tensor cross_entropy_kl(const LikelihoodSpec& lik, const NetworkSpec& net, const Tensor& theta,
                        const Batch& batch) {
  return -mean(point_log_likelihood(lik, net, theta, batch));
}

Tensor cross_entropy_beta(const LikelihoodSpec& lik, const NetworkSpec& net, const Tensor& theta,
                          const Batch& batch, double beta) {
  return cross_entropy(DivergenceConfig::beta(beta, batch.size()), lik, net, theta, batch);
}

Tensor cross_entropy_gamma_transformed(const LikelihoodSpec& lik, const NetworkSpec& net,
                                       const Tensor& theta, const Batch& batch, double gamma) {
  return cross_entropy(DivergenceConfig::gamma_transformed(gamma, batch.size()), lik, net, theta,
                       batch);
}

Tensor cross_entropy_gamma_original(const LikelihoodSpec& lik, const NetworkSpec& net,
                                    const Tensor& theta, const Batch& batch, double gamma,
                                    std::size_t n_total) {
  return cross_entropy(DivergenceConfig::gamma_original(gamma, n_total), lik, net, theta, batch);
}

Tensor cross_entropy(const DivergenceConfig& config, const LikelihoodSpec& lik, const NetworkSpec& net,
                     const Tensor& theta, const Batch& batch) {
  config.validate();
  batch.validate(net);
  if (config.kind == DivergenceKind::gamma_original && batch.size() < config.n_total) {
    throw ConfigError("gamma_original cross-entropy needs the full dataset (" +
                      std::to_string(config.n_total) + " points), got a batch of " +
                      std::to_string(batch.size()));
  }
  const Tensor f = forward(net, theta, batch.inputs);
  return cross_entropy_from_points(config, lik, log_likelihood(lik, f, batch.targets), f, nullptr);
}

Tensor weighted_cross_entropy(const DivergenceConfig& config, const LikelihoodSpec& lik,
                              const NetworkSpec& net, const Tensor& theta, const Batch& batch,
                              const Tensor& weights) {
  config.validate();
  batch.validate(net);
  const Tensor f = forward(net, theta, batch.inputs);
  return cross_entropy_from_points(config, lik, log_likelihood(lik, f, batch.targets), f, &weights);
}

Tensor variational_objective(const Tensor& m, const Tensor& s, const PriorSpec& prior,
                             const LikelihoodSpec& lik, const NetworkSpec& net, const Batch& batch,
                             const DivergenceConfig& config, std::size_t mc_samples, Rng& rng) {
  if (mc_samples < 1) throw ConfigError("mc_samples must be at least 1");
  if (m.size() != net.param_count()) throw ShapeError("variational means do not match the network");
  Tensor data = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < mc_samples; ++k) {
    data = data + cross_entropy(config, lik, net, sample_theta(m, s, rng), batch);
  }
  return kl_q_prior(m, s, prior) + (config.weight() / static_cast<double>(mc_samples)) * data;
}

double variational_objective(const MeanFieldGaussian& q, const PriorSpec& prior,
                             const LikelihoodSpec& lik, const NetworkSpec& net, const Batch& batch,
                             const DivergenceConfig& config, std::size_t mc_samples, Rng& rng) {
  return variational_objective(Tensor::vector(q.means), Tensor::vector(q.raw_scales), prior, lik, net,
                               batch, config, mc_samples, rng)
      .item();
}

}  // namespace rvi
