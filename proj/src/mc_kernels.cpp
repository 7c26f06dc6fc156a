#include "rvi/mc_kernels.hpp"

#include <omp.h>

#include <cmath>
#include <exception>

namespace rvi {

void Problem::validate() const {
  net.validate();
  lik.validate();
  prior.validate(net.param_count());
  divergence.validate();
}

NoiseDraws NoiseDraws::draw(std::size_t samples, std::size_t dim, Rng& rng) {
  if (samples < 1) throw ConfigError("need at least one Monte Carlo sample");
  return NoiseDraws{samples, dim, standard_normal(samples, dim, rng)};
}

Tensor NoiseDraws::row(std::size_t k) const {
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(k * dim);
  return Tensor::vector(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(dim)));
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

namespace {

// Runs body(k) for every draw and rethrows the first failure on the caller.
template <class Body>
void for_each_draw(std::size_t samples, Execution exec, Body body) {
  if (exec == Execution::serial) {
    for (std::size_t k = 0; k < samples; ++k) body(k);
    return;
  }
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(samples);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      body(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(rvi_mc_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

void check_draws(const MeanFieldGaussian& q, const NoiseDraws& draws) {
  if (draws.dim != q.dim()) throw ShapeError("noise draws do not match the variational dimension");
  if (q.raw_scales.size() != q.dim()) throw ShapeError("means and scales differ in length");
}

}  // namespace

void parallel_for(std::size_t n, Execution exec, const std::function<void(std::size_t)>& body) {
  for_each_draw(n, exec, body);
}

ExpectationGradient expectation_gradient(const MeanFieldGaussian& q, const NoiseDraws& draws,
                                         const SampleFn& fn, Execution exec) {
  check_draws(q, draws);
  const std::size_t S = draws.samples;
  std::vector<double> values(S);
  std::vector<std::vector<double>> gm(S), gs(S);
  for_each_draw(S, exec, [&](std::size_t k) {
    Tape tape;
    const Tensor m = tape.variable(Tensor::vector(q.means));
    const Tensor s = tape.variable(Tensor::vector(q.raw_scales));
    const Tensor out = fn(sample_theta(m, s, draws.row(k)), k);
    values[k] = out.item();
    if (!out.on_tape()) {
      gm[k].assign(q.dim(), 0.0);
      gs[k].assign(q.dim(), 0.0);
      return;
    }
    const auto g = tape.gradient(out, std::vector<Tensor>{m, s});
    gm[k] = g[0].to_vector();
    gs[k] = g[1].to_vector();
  });

  ExpectationGradient r;
  r.grad_m.assign(q.dim(), 0.0);
  r.grad_s.assign(q.dim(), 0.0);
  const double inv = 1.0 / static_cast<double>(S);
  for (std::size_t k = 0; k < S; ++k) {
    r.value += values[k] * inv;
    for (std::size_t i = 0; i < q.dim(); ++i) {
      r.grad_m[i] += gm[k][i] * inv;
      r.grad_s[i] += gs[k][i] * inv;
    }
  }
  return r;
}

std::vector<double> expectation_hvp(const MeanFieldGaussian& q, const NoiseDraws& draws,
                                    const SampleFn& fn, std::span<const double> v, HessianScope scope,
                                    Execution exec) {
  check_draws(q, draws);
  const std::size_t P = q.dim();
  const bool full = scope == HessianScope::means_and_scales;
  const std::size_t n = full ? 2 * P : P;
  if (v.size() != n) throw ShapeError("hvp direction has the wrong length");
  const std::size_t S = draws.samples;
  const Tensor vm = Tensor::vector(std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(P)));
  const Tensor vs = full ? Tensor::vector(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(P), v.end()))
                         : Tensor::zeros({P});

  std::vector<std::vector<double>> slots(S);
  for_each_draw(S, exec, [&](std::size_t k) {
    Tape tape;
    const Tensor m = tape.variable(Tensor::vector(q.means));
    // Frozen scales enter as constants so the second pass only sees m.
    const Tensor s = full ? tape.variable(Tensor::vector(q.raw_scales)) : Tensor::vector(q.raw_scales);
    const Tensor out = fn(sample_theta(m, s, draws.row(k)), k);
    if (!out.on_tape()) {
      slots[k].assign(n, 0.0);
      return;
    }
    std::vector<Tensor> params{m};
    std::vector<Tensor> dirs{vm};
    if (full) {
      params.push_back(s);
      dirs.push_back(vs);
    }
    const auto hv = hessian_vector_product(out, params, dirs);
    slots[k] = hv[0].to_vector();
    if (full) {
      const auto tail = hv[1].to_vector();
      slots[k].insert(slots[k].end(), tail.begin(), tail.end());
    }
  });

  std::vector<double> out(n, 0.0);
  const double inv = 1.0 / static_cast<double>(S);
  for (std::size_t k = 0; k < S; ++k)
    for (std::size_t i = 0; i < n; ++i) out[i] += slots[k][i] * inv;
  return out;
}

ObjectiveGradient objective_and_gradient(const Problem& problem, const MeanFieldGaussian& q,
                                         const Batch& batch, const NoiseDraws& draws, Execution exec) {
  q.validate(problem.net.param_count());
  const SampleFn data = [&](const Tensor& theta, std::size_t) {
    return cross_entropy(problem.divergence, problem.lik, problem.net, theta, batch);
  };
  const auto e = expectation_gradient(q, draws, data, exec);

  Tape tape;
  const Tensor m = tape.variable(Tensor::vector(q.means));
  const Tensor s = tape.variable(Tensor::vector(q.raw_scales));
  const Tensor kl = kl_q_prior(m, s, problem.prior);
  const auto gkl = tape.gradient(kl, std::vector<Tensor>{m, s});

  const double w = problem.divergence.weight();
  ObjectiveGradient r;
  r.kl = kl.item();
  r.data_term = w * e.value;
  r.value = r.kl + r.data_term;
  r.grad_m = gkl[0].to_vector();
  r.grad_s = gkl[1].to_vector();
  for (std::size_t i = 0; i < q.dim(); ++i) {
    r.grad_m[i] += w * e.grad_m[i];
    r.grad_s[i] += w * e.grad_s[i];
  }
  return r;
}

std::vector<double> objective_hvp(const Problem& problem, const MeanFieldGaussian& q, const Batch& batch,
                                  const NoiseDraws& draws, std::span<const double> v,
                                  HessianScope scope, Execution exec) {
  q.validate(problem.net.param_count());
  const SampleFn data = [&](const Tensor& theta, std::size_t) {
    return cross_entropy(problem.divergence, problem.lik, problem.net, theta, batch);
  };
  auto out = expectation_hvp(q, draws, data, v, scope, exec);
  const double w = problem.divergence.weight();
  for (auto& x : out) x *= w;

  // The prior KL is separable: d2/dm2 = 1/sp^2, d2/ds2 = 2 exp(2s)/sp^2.
  const std::size_t P = q.dim();
  for (std::size_t i = 0; i < P; ++i) {
    const double inv_var = 1.0 / (problem.prior.std[i] * problem.prior.std[i]);
    out[i] += inv_var * v[i];
    if (scope == HessianScope::means_and_scales) {
      out[P + i] += 2.0 * std::exp(2.0 * q.raw_scales[i]) * inv_var * v[P + i];
    }
  }
  return out;
}

}  // namespace rvi
