#include "rvi/influence.hpp"

#include "rvi/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rvi {

void InfluenceOptions::validate() const {
  if (gradient_mc < 1 || hessian_mc < 1) throw ConfigError("influence MC sample counts must be positive");
  if (!(damping >= 0.0)) throw ConfigError("damping must be non-negative");
  if (!(cg_tol > 0.0)) throw ConfigError("cg_tol must be positive");
  if (cg_max_iter < 1) throw ConfigError("cg_max_iter must be positive");
  if (!(max_damping >= 0.0)) throw ConfigError("max_damping must be non-negative");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> flatten_grads(const std::vector<Tensor>& ts) {
  std::vector<double> out;
  for (const auto& t : ts) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

}  // namespace

CgResult conjugate_gradient(const LinearOperator& apply, std::span<const double> b, double tol,
                            std::size_t max_iter) {
  const std::size_t n = b.size();
  CgResult out;
  out.x.assign(n, 0.0);
  const double bnorm = norm(b);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  std::vector<double> r(b.begin(), b.end());
  std::vector<double> p = r;
  double rs = dot(r, r);
  // Iterate a little past tol so the recomputed residual also clears it.
  const double target = 0.5 * tol * bnorm;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const auto Ap = apply(p);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) {
      out.indefinite = true;
      break;
    }
    const double alpha = rs / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    out.iterations = it + 1;
    const double rs_new = dot(r, r);
    if (std::sqrt(rs_new) <= target) break;
    const double beta = rs_new / rs;
    rs = rs_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  const auto Ax = apply(out.x);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) res += (Ax[i] - b[i]) * (Ax[i] - b[i]);
  out.residual = std::sqrt(res) / bnorm;
  out.converged = out.residual < tol;
  return out;
}

std::string contamination_label(const Contamination& c) {
  if (std::holds_alternative<AddPoint>(c)) return "add_point";
  if (const auto* p = std::get_if<PerturbInput>(&c)) {
    return "perturb_input(" + std::to_string(p->index) + "," + std::to_string(p->feature) + ")";
  }
  return "label_flip(" + std::to_string(std::get<LabelFlip>(c).index) + ")";
}

InfluenceContext::InfluenceContext(Problem problem, MeanFieldGaussian q, Batch data,
                                   InfluenceOptions options)
    : problem_(std::move(problem)), q_(std::move(q)), data_(std::move(data)), options_(options) {
  problem_.validate();
  options_.validate();
  data_.validate(problem_.net);
  const std::size_t P = problem_.net.param_count();
  q_.validate(P);
  Rng rng(options_.seed);
  hessian_draws_ = NoiseDraws::draw(options_.hessian_mc, P, rng);
  if (!options_.share_draws) own_gradient_draws_ = NoiseDraws::draw(options_.gradient_mc, P, rng);

  const Problem& pr = problem_;
  const Batch& all = data_;
  data_gradient_ = expected_gradient([&pr, &all](const Tensor& theta, std::size_t) {
    return cross_entropy(pr.divergence, pr.lik, pr.net, theta, all);
  });

  Tape tape;
  const Tensor m = tape.variable(Tensor::vector(q_.means));
  const Tensor s = Tensor::vector(q_.raw_scales);
  const auto gkl = tape.gradient(kl_q_prior(m, s, problem_.prior), std::vector<Tensor>{m})[0];
  const double w = problem_.divergence.weight();
  double sq = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    const double g = gkl[i] + w * data_gradient_[i];
    sq += g * g;
  }
  stationarity_ = std::sqrt(sq);
}

std::size_t InfluenceContext::dim() const {
  const std::size_t P = q_.dim();
  return options_.scope == HessianScope::means ? P : 2 * P;
}

std::vector<double> InfluenceContext::damped_hvp(std::span<const double> v) const {
  return damped_hvp(v, options_.damping);
}

std::vector<double> InfluenceContext::damped_hvp(std::span<const double> v, double damping) const {
  auto out = objective_hvp(problem_, q_, data_, hessian_draws_, v, options_.scope, options_.execution);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += damping * v[i];
  return out;
}

CgResult InfluenceContext::solve(std::span<const double> b) const {
  if (b.size() != dim()) throw ShapeError("right-hand side does not match the influence dimension");
  double damping = options_.damping;
  while (true) {
    auto r = conjugate_gradient([this, damping](std::span<const double> v) { return damped_hvp(v, damping); },
                                b, options_.cg_tol, options_.cg_max_iter);
    r.damping = damping;
    const double next = damping > 0.0 ? 10.0 * damping : 1e-3;
    if (r.converged || next > options_.max_damping * (1.0 + 1e-12)) return r;
    damping = next;
  }
}

std::vector<double> InfluenceContext::expected_gradient(const SampleFn& fn) const {
  auto e = expectation_gradient(q_, gradient_draws(), fn, options_.execution);
  if (options_.scope == HessianScope::means_and_scales) {
    e.grad_m.insert(e.grad_m.end(), e.grad_s.begin(), e.grad_s.end());
  }
  return e.grad_m;
}

namespace {

Batch single_row(const Batch& data, std::size_t i) {
  const std::size_t idx[1] = {i};
  return take_rows(data, idx);
}

Batch point_batch(const Problem& pr, const AddPoint& z) {
  const std::size_t D = pr.net.input_dim();
  const std::size_t K = pr.net.output_dim();
  if (z.x.size() != D || z.y.size() != K) {
    throw ShapeError("contamination point has dimensions (" + std::to_string(z.x.size()) + ", " +
                     std::to_string(z.y.size()) + "), model expects (" + std::to_string(D) + ", " +
                     std::to_string(K) + ")");
  }
  return Batch{Tensor({1, D}, z.x), Tensor({1, K}, z.y)};
}

Batch flipped_row(const InfluenceContext& ctx, std::size_t i) {
  if (!ctx.problem().lik.binary()) throw ConfigError("label flips need a binary likelihood");
  if (i >= ctx.data().size()) throw ShapeError("label flip index out of range");
  Batch b = single_row(ctx.data(), i);
  b.targets = Tensor(b.targets.shape(), {1.0 - b.targets[0]});
  return b;
}

void check_perturb(const InfluenceContext& ctx, const PerturbInput& p) {
  if (p.index >= ctx.data().size()) throw ShapeError("perturbation index out of range");
  if (p.feature >= ctx.problem().net.input_dim()) throw ShapeError("perturbation feature out of range");
}

// Per-point divergence d(z) of an additive divergence: the cross-entropy of a
// one-row batch.
Tensor point_divergence(const Problem& pr, const Tensor& theta, const Batch& z) {
  const Tensor f = forward(pr.net, theta, z.inputs);
  return cross_entropy_from_points(pr.divergence, pr.lik, log_likelihood(pr.lik, f, z.targets), f, nullptr);
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  std::vector<double> v = a.to_vector();
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor({a.shape()[0] + b.shape()[0], a.shape()[1]}, std::move(v));
}

void scale(std::vector<double>& v, double c) {
  for (auto& x : v) x *= c;
}

void axpy(std::vector<double>& y, double a, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

std::vector<double> outlier_gradient(const InfluenceContext& ctx, const Contamination& c) {
  const Problem& pr = ctx.problem();
  if (!pr.divergence.additive()) {
    throw UnsupportedError("the per-point decomposition needs an additive divergence; use the generic route");
  }
  const double w = pr.divergence.weight();

  if (const auto* z = std::get_if<AddPoint>(&c)) {
    const Batch zb = point_batch(pr, *z);
    auto g = ctx.expected_gradient([&](const Tensor& theta, std::size_t) { return point_divergence(pr, theta, zb); });
    axpy(g, -1.0, ctx.data_gradient());
    scale(g, w);
    return g;
  }
  if (const auto* flip = std::get_if<LabelFlip>(&c)) {
    const Batch orig = single_row(ctx.data(), flip->index);
    const Batch flipped = flipped_row(ctx, flip->index);
    auto g = ctx.expected_gradient([&](const Tensor& theta, std::size_t) {
      return point_divergence(pr, theta, flipped) - point_divergence(pr, theta, orig);
    });
    scale(g, w);
    return g;
  }
  const auto& p = std::get<PerturbInput>(c);
  check_perturb(ctx, p);
  const Batch row = single_row(ctx.data(), p.index);
  auto g = ctx.expected_gradient([&](const Tensor& theta, std::size_t) {
    Tape& tape = *theta.tape();
    const Tensor x = tape.variable(row.inputs);
    const Tensor d = point_divergence(pr, theta, Batch{x, row.targets});
    const Tensor dx = tape.gradient(d, std::vector<Tensor>{x}, /*create_graph=*/true)[0];
    return sum(slice(dx, p.feature, 1));
  });
  scale(g, w / static_cast<double>(ctx.data().size()));
  return g;
}

std::vector<double> outlier_gradient_generic(const InfluenceContext& ctx, const Contamination& c) {
  const Problem& pr = ctx.problem();
  const Batch& data = ctx.data();
  const std::size_t N = data.size();
  const double inv_n = 1.0 / static_cast<double>(N);

  // Builds the contaminated weighted objective as a function of a tape scalar eps.
  std::function<Tensor(const Tensor& theta, const Tensor& eps)> objective;
  Batch augmented;
  if (const auto* z = std::get_if<AddPoint>(&c)) {
    const Batch zb = point_batch(pr, *z);
    augmented = Batch{concat_rows(data.inputs, zb.inputs), concat_rows(data.targets, zb.targets)};
    objective = [&pr, &augmented, N, inv_n](const Tensor& theta, const Tensor& eps) {
      const Tensor w_data = broadcast_to((1.0 - eps) * inv_n, {N});
      const Tensor weights = pad(w_data, 0, N + 1) + pad(reshape(eps, {1}), N, N + 1);
      return weighted_cross_entropy(pr.divergence, pr.lik, pr.net, theta, augmented, weights);
    };
  } else if (const auto* flip = std::get_if<LabelFlip>(&c)) {
    const Batch fb = flipped_row(ctx, flip->index);
    augmented = Batch{concat_rows(data.inputs, fb.inputs), concat_rows(data.targets, fb.targets)};
    const std::size_t i = flip->index;
    objective = [&pr, &augmented, N, inv_n, i](const Tensor& theta, const Tensor& eps) {
      std::vector<double> base(N + 1, inv_n);
      base[N] = 0.0;
      const Tensor e1 = reshape(eps, {1});
      const Tensor weights = Tensor::vector(base) - pad(e1, i, N + 1) + pad(e1, N, N + 1);
      return weighted_cross_entropy(pr.divergence, pr.lik, pr.net, theta, augmented, weights);
    };
  } else {
    const auto& p = std::get<PerturbInput>(c);
    check_perturb(ctx, p);
    const std::size_t D = pr.net.input_dim();
    std::vector<double> onehot(N * D, 0.0);
    onehot[p.index * D + p.feature] = 1.0;
    const Tensor direction({N, D}, std::move(onehot));
    objective = [&pr, &data, direction, inv_n, N](const Tensor& theta, const Tensor& eps) {
      const Batch moved{data.inputs + eps * direction, data.targets};
      return weighted_cross_entropy(pr.divergence, pr.lik, pr.net, theta, moved,
                                    Tensor::full({N}, inv_n));
    };
  }

  auto g = ctx.expected_gradient([&objective](const Tensor& theta, std::size_t) {
    Tape& tape = *theta.tape();
    const Tensor eps = tape.variable(Tensor::scalar(0.0));
    const Tensor d = objective(theta, eps);
    return tape.gradient(d, std::vector<Tensor>{eps}, /*create_graph=*/true)[0];
  });
  scale(g, pr.divergence.weight());
  return g;
}

InfluenceResult influence_from_gradient(const InfluenceContext& ctx, std::vector<double> g) {
  if (g.size() != ctx.dim()) throw ShapeError("gradient does not match the influence dimension");
  InfluenceResult r;
  r.cg = ctx.solve(g);
  r.if_vector = r.cg.x;
  scale(r.if_vector, -1.0);
  r.gradient = std::move(g);
  return r;
}

InfluenceResult influence_vector(const InfluenceContext& ctx, const Contamination& c) {
  auto g = ctx.problem().divergence.additive() ? outlier_gradient(ctx, c) : outlier_gradient_generic(ctx, c);
  return influence_from_gradient(ctx, std::move(g));
}

std::vector<double> test_gradient(const InfluenceContext& ctx, const Batch& test) {
  const Problem& pr = ctx.problem();
  test.validate(pr.net);
  return ctx.expected_gradient([&](const Tensor& theta, std::size_t) {
    return mean(point_log_likelihood(pr.lik, pr.net, theta, test));
  });
}

double predictive_influence(std::span<const double> test_grad, std::span<const double> if_vector) {
  if (test_grad.size() != if_vector.size()) throw ShapeError("test gradient and IF differ in length");
  return dot(test_grad, if_vector);
}

double predictive_influence(const InfluenceContext& ctx, std::span<const double> if_vector,
                            const Batch& test) {
  return predictive_influence(test_gradient(ctx, test), if_vector);
}

std::vector<double> default_sweep_grid(double original) {
  std::vector<double> grid{original};
  for (int e = 0; e <= 6; ++e) {
    grid.push_back(std::pow(10.0, e));
    grid.push_back(-std::pow(10.0, e));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

namespace {

struct SignedLog {
  double log_pos = -std::numeric_limits<double>::infinity();
  double log_neg = -std::numeric_limits<double>::infinity();

  static double lse(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  }
  // Adds sign(c) * exp(log_scale) * |c|.
  void add(double c, double log_scale) {
    if (c == 0.0) return;
    const double l = log_scale + std::log(std::abs(c));
    if (c > 0.0) log_pos = lse(log_pos, l);
    else log_neg = lse(log_neg, l);
  }
  // Returns (value, natural log of |value|).
  std::pair<double, double> result() const {
    const double inf = std::numeric_limits<double>::infinity();
    if (log_pos == log_neg) return {0.0, -inf};
    const double hi = std::max(log_pos, log_neg);
    const double lo = std::min(log_pos, log_neg);
    const double log_abs = hi + std::log1p(-std::exp(lo - hi));
    const double sign = log_pos > log_neg ? 1.0 : -1.0;
    return {sign * std::exp(log_abs), log_abs};
  }
};

// -w * s . d/dm E_q[d(z)] for an additive divergence, with each draw's
// exp(kappa * l) factor kept in log form. Writing d(z) = -A exp(kappa l) + B,
// its gradient is -exp(kappa l) grad(A + kappa stopgrad(A) l) + grad B.
std::pair<double, double> point_influence(const InfluenceContext& ctx, std::span<const double> s,
                                          const Batch& z) {
  const Problem& pr = ctx.problem();
  const auto& draws = ctx.gradient_draws();
  const std::size_t S = draws.samples;
  const bool full = ctx.options().scope == HessianScope::means_and_scales;
  const double kappa = pr.divergence.kind == DivergenceKind::kl ? 0.0 : pr.divergence.power;
  const MeanFieldGaussian& q = ctx.q();

  std::vector<double> log_factor(S, 0.0), a(S, 0.0), b(S, 0.0);
  parallel_for(S, ctx.options().execution, [&](std::size_t k) {
    Tape tape;
    const Tensor m = tape.variable(Tensor::vector(q.means));
    const Tensor sc = full ? tape.variable(Tensor::vector(q.raw_scales)) : Tensor::vector(q.raw_scales);
    std::vector<Tensor> params{m};
    if (full) params.push_back(sc);
    const Tensor theta = sample_theta(m, sc, draws.row(k));
    const Tensor f = forward(pr.net, theta, z.inputs);
    const Tensor ll = sum(log_likelihood(pr.lik, f, z.targets));
    auto directional = [&](const Tensor& t) {
      if (!t.on_tape()) return 0.0;
      return dot(s, flatten_grads(tape.gradient(t, params)));
    };
    Tensor A, B;
    bool has_a = true;
    switch (pr.divergence.kind) {
      case DivergenceKind::kl:
        has_a = false;
        B = -ll;
        break;
      case DivergenceKind::beta:
        A = Tensor::scalar((kappa + 1.0) / kappa);
        B = sum(power_integral(pr.lik, f, 1.0 + kappa));
        break;
      case DivergenceKind::gamma_transformed:
        A = ((kappa + 1.0) / kappa) / sum(gamma_normalizer(pr.lik, f, kappa));
        B = Tensor::scalar(0.0);
        break;
      case DivergenceKind::gamma_original:
        throw UnsupportedError("point decomposition is undefined for the original gamma divergence");
    }
    if (has_a) {
      log_factor[k] = kappa * ll.item();
      a[k] = directional(A + kappa * A.detach() * ll);
    }
    b[k] = directional(B);
  });

  // point = (w / S) sum_k [exp(kappa l_k) a_k - b_k]
  SignedLog acc;
  for (std::size_t k = 0; k < S; ++k) {
    acc.add(a[k], log_factor[k]);
    acc.add(-b[k], 0.0);
  }
  auto [value, log_abs] = acc.result();
  const double scale_factor = pr.divergence.weight() / static_cast<double>(S);
  return {value * scale_factor, (log_abs + std::log(scale_factor)) / std::log(10.0)};
}

}  // namespace

std::vector<SweepPoint> outlier_sweep(std::span<const InfluenceContext* const> methods,
                                      const SweepSpec& spec) {
  std::vector<SweepPoint> out;
  for (const InfluenceContext* ctx : methods) {
    const Problem& pr = ctx->problem();
    if (spec.base_index >= ctx->data().size()) throw ShapeError("sweep base index out of range");
    if (spec.axis == SweepAxis::input && spec.feature >= pr.net.input_dim()) {
      throw ShapeError("sweep feature out of range");
    }
    const auto t = test_gradient(*ctx, spec.test);
    const auto cg = ctx->solve(t);
    const auto& s = cg.x;
    // -s . g = point + w * s . d/dm E_q[d_data]
    const double removal = pr.divergence.weight() * dot(s, ctx->data_gradient());
    const Batch base = single_row(ctx->data(), spec.base_index);

    for (double magnitude : spec.magnitudes) {
      AddPoint z{base.inputs.to_vector(), base.targets.to_vector()};
      if (spec.axis == SweepAxis::input) z.x[spec.feature] = magnitude;
      else z.y[0] = magnitude;

      SweepPoint pt;
      pt.method = pr.divergence.label();
      pt.axis = spec.axis == SweepAxis::input ? "input" + std::to_string(spec.feature) : "output";
      pt.magnitude = magnitude;
      pt.cg_residual = cg.residual;
      pt.damping = cg.damping;
      if (pr.divergence.additive()) {
        const auto [value, log10_abs] = point_influence(*ctx, s, point_batch(pr, z));
        pt.point_influence = value;
        pt.log10_abs_point_influence = log10_abs;
        pt.predictive_influence = value + removal;
      } else {
        const auto g = outlier_gradient_generic(*ctx, z);
        pt.predictive_influence = -dot(s, g);
        pt.point_influence = pt.predictive_influence;
        pt.log10_abs_point_influence = std::log10(std::abs(pt.predictive_influence));
      }
      out.push_back(pt);
    }
  }
  return out;
}

LabelFlipSummary label_flip_average(const InfluenceContext& ctx, const Batch& test) {
  const Problem& pr = ctx.problem();
  if (!pr.lik.binary()) throw ConfigError("label-flip audit needs a binary likelihood");
  validate_targets(pr.lik, test.targets);
  const Batch& data = ctx.data();
  const std::size_t N = data.size();

  const auto t = test_gradient(ctx, test);
  const auto cg = ctx.solve(t);
  LabelFlipSummary summary;
  summary.method = pr.divergence.label();
  summary.cg_residual = cg.residual;
  summary.damping = cg.damping;
  summary.n_train = N;
  summary.n_test = test.size();

  double mean_influence = 0.0;
  if (pr.divergence.additive()) {
    // sum_i g_i = w * N * d/dm E_q[CE(all labels flipped) - CE(data)]
    std::vector<double> flipped(data.targets.size());
    for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1.0 - data.targets[i];
    const Batch all_flipped{data.inputs, Tensor(data.targets.shape(), std::move(flipped))};
    auto g = ctx.expected_gradient([&](const Tensor& theta, std::size_t) {
      return cross_entropy(pr.divergence, pr.lik, pr.net, theta, all_flipped);
    });
    axpy(g, -1.0, ctx.data_gradient());
    scale(g, pr.divergence.weight());
    mean_influence = -dot(cg.x, g);
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      mean_influence -= dot(cg.x, outlier_gradient_generic(ctx, LabelFlip{i})) / static_cast<double>(N);
    }
  }
  summary.average = mean_influence / static_cast<double>(N);
  return summary;
}

}  // namespace rvi
