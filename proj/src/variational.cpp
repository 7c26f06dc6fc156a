#include "rvi/variational.hpp"

#include <cmath>

namespace rvi {

MeanFieldGaussian MeanFieldGaussian::initialize(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> init(0.0, 0.1);
  MeanFieldGaussian q;
  q.means.resize(dim);
  for (auto& m : q.means) m = init(rng);
  q.raw_scales.assign(dim, std::log(0.05));
  return q;
}

MeanFieldGaussian MeanFieldGaussian::point_mass(std::vector<double> means, double raw_scale) {
  MeanFieldGaussian q;
  q.raw_scales.assign(means.size(), raw_scale);
  q.means = std::move(means);
  return q;
}

std::vector<double> MeanFieldGaussian::stds() const {
  std::vector<double> out(raw_scales.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(raw_scales[i]);
  return out;
}

void MeanFieldGaussian::validate(std::size_t expected_dim) const {
  if (means.size() != expected_dim || raw_scales.size() != expected_dim) {
    throw ShapeError("variational parameters have dimension " + std::to_string(means.size()) +
                     ", model needs " + std::to_string(expected_dim));
  }
}

PriorSpec PriorSpec::standard(std::size_t dim) {
  return PriorSpec{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

void PriorSpec::validate(std::size_t expected_dim) const {
  if (mean.size() != expected_dim || std.size() != expected_dim) {
    throw ShapeError("prior dimension does not match the model");
  }
  for (double s : std) {
    if (!(s > 0.0)) throw ConfigError("prior std must be positive");
  }
}

std::vector<double> standard_normal(std::size_t count, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n01;
  std::vector<double> out(count * dim);
  for (auto& v : out) v = n01(rng);
  return out;
}

Tensor sample_theta(const Tensor& m, const Tensor& s, const Tensor& eps) {
  if (m.size() != s.size() || m.size() != eps.size()) throw ShapeError("sample_theta: size mismatch");
  return m + exp(s) * eps;
}

Tensor sample_theta(const Tensor& m, const Tensor& s, Rng& rng) {
  return sample_theta(m, s, Tensor::vector(standard_normal(1, m.size(), rng)));
}

Tensor kl_q_prior(const Tensor& m, const Tensor& s, const PriorSpec& prior) {
  prior.validate(m.size());
  std::vector<double> log_sp(prior.std.size()), inv_var(prior.std.size());
  for (std::size_t i = 0; i < log_sp.size(); ++i) {
    log_sp[i] = std::log(prior.std[i]);
    inv_var[i] = 1.0 / (2.0 * prior.std[i] * prior.std[i]);
  }
  const Tensor mu = Tensor::vector(prior.mean);
  const Tensor terms = Tensor::vector(log_sp) - s +
                       (exp(2.0 * s) + square(m - mu)) * Tensor::vector(inv_var) - 0.5;
  return sum(terms);
}

double kl_q_prior(const MeanFieldGaussian& q, const PriorSpec& prior) {
  q.validate(prior.mean.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double sp = prior.std[i];
    const double d = q.means[i] - prior.mean[i];
    kl += std::log(sp) - q.raw_scales[i] +
          (std::exp(2.0 * q.raw_scales[i]) + d * d) / (2.0 * sp * sp) - 0.5;
  }
  return kl;
}

}  // namespace rvi
