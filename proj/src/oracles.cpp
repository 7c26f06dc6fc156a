#include "rvi/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rvi {

void QuadratureGrid::validate() const {
  if (lower.empty() || lower.size() > 2) throw ConfigError("quadrature grid needs one or two dimensions");
  if (lower.size() != upper.size()) throw ConfigError("quadrature bounds differ in dimension");
  for (std::size_t d = 0; d < lower.size(); ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d])) throw ConfigError("quadrature bounds must be finite");
    if (!(upper[d] > lower[d])) throw ConfigError("quadrature upper bound must exceed the lower bound");
  }
  if (points < 101) throw ConfigError("quadrature grid needs at least 101 points per dimension");
}

QuadratureGrid QuadratureGrid::refined() const { return QuadratureGrid{lower, upper, 2 * points - 1}; }

namespace {

constexpr double kOutsideTolerance = 1e-8;

double gaussian_log_density(double y, double f, double sigma) {
  const double z = (y - f) / sigma;
  return -0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) - 0.5 * z * z;
}

double student_log_density(double y, double f, double nu, double sigma) {
  const double z = (y - f) / sigma;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi * sigma * sigma) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Scalar cross-entropy of a Gaussian model from per-point log densities.
double scalar_cross_entropy(const DivergenceConfig& div, std::span<const double> ll, double integral) {
  const double n = static_cast<double>(ll.size());
  const double p = div.power;
  switch (div.kind) {
    case DivergenceKind::kl: {
      double s = 0.0;
      for (double l : ll) s += l;
      return -s / n;
    }
    case DivergenceKind::beta: {
      double s = 0.0;
      for (double l : ll) s += std::exp(p * l);
      return -((p + 1.0) / p) * s / n + integral;
    }
    case DivergenceKind::gamma_transformed: {
      double s = 0.0;
      for (double l : ll) s += std::exp(p * l);
      return -((p + 1.0) / p) * (s / n) / std::pow(integral, p / (1.0 + p));
    }
    case DivergenceKind::gamma_original: {
      double mx = -std::numeric_limits<double>::infinity();
      for (double l : ll) mx = std::max(mx, p * l);
      double s = 0.0;
      for (double l : ll) s += std::exp(p * l - mx);
      return -(1.0 / p) * (mx + std::log(s / n)) + std::log(integral) / (1.0 + p);
    }
  }
  return 0.0;
}

std::vector<double> trapezoid_weights(double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> w(n, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + h * static_cast<double>(i);
  v.back() = hi;
  return v;
}

}  // namespace

double quadrature_power_integral(const LikelihoodSpec& lik, double f, double exponent) {
  lik.validate();
  if (!(exponent > 0.0)) throw ConfigError("power integral exponent must be positive");
  if (lik.binary()) {
    const double s = 1.0 / (1.0 + std::exp(-f));
    const double p1 = lik.kind == LikelihoodKind::robust_logistic ? lik.epsilon + (1.0 - 2.0 * lik.epsilon) * s : s;
    return std::pow(p1, exponent) + std::pow(1.0 - p1, exponent);
  }
  auto log_density = [&](double y) {
    if (lik.kind == LikelihoodKind::student_t) return student_log_density(y, f, lik.nu, lik.sigma);
    return gaussian_log_density(y, f, lik.sigma);
  };
  // y = f + sigma sinh(t): the mapped integrand decays at least exponentially
  // in t for every integrable case, so a fixed-step rule converges quickly.
  const double h = 1.0 / 128.0;
  const double t_max = 40.0;
  auto term = [&](double t) {
    return std::exp(exponent * log_density(f + lik.sigma * std::sinh(t))) * lik.sigma * std::cosh(t);
  };
  double total = term(0.0);
  double edge = 0.0;
  bool closed = false;
  for (std::size_t k = 1; static_cast<double>(k) * h <= t_max; ++k) {
    const double t = static_cast<double>(k) * h;
    const double a = term(t), b = term(-t);
    total += a + b;
    edge = a + b;
    if (edge < 1e-20 * total) {
      closed = true;
      break;
    }
  }
  if (!closed || !std::isfinite(total)) {
    throw NumericError("power integral tail check failed (edge term " + std::to_string(edge) + ")");
  }
  return total * h;
}

PseudoPosterior pseudo_posterior_quadrature(OracleModel model, double sigma, const OracleData& data,
                                            const DivergenceConfig& divergence, const PriorSpec& prior,
                                            const QuadratureGrid& grid) {
  grid.validate();
  const std::size_t dims = model == OracleModel::gaussian_mean ? 1 : 2;
  if (grid.dims() != dims) throw ConfigError("quadrature grid dimension does not match the model");
  prior.validate(dims);
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (model == OracleModel::linear_regression && data.x.size() != data.y.size()) {
    throw ShapeError("regression oracle data has mismatched x and y");
  }
  const std::size_t N = data.size();
  if (N > 0) divergence.validate();
  const double exponent = divergence.kind == DivergenceKind::kl ? 1.0 : 1.0 + divergence.power;
  const double integral =
      divergence.kind == DivergenceKind::kl ? 1.0 : quadrature_power_integral(LikelihoodSpec::gaussian(sigma), 0.0, exponent);
  const double w = divergence.weight();

  // Evaluate on a box widened by half its width on each side; with 2n - 1
  // nodes per axis the original grid is a subset of these nodes.
  const std::size_t n = grid.points;
  const std::size_t wide_n = 2 * n - 1;
  std::vector<std::vector<double>> wide_axes(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    const double width = grid.upper[d] - grid.lower[d];
    wide_axes[d] = linspace(grid.lower[d] - 0.5 * width, grid.upper[d] + 0.5 * width, wide_n);
  }
  const std::size_t nodes = dims == 1 ? wide_n : wide_n * wide_n;
  std::vector<double> log_post(nodes);
  const auto count = static_cast<std::ptrdiff_t>(nodes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t node = 0; node < count; ++node) {
    const std::size_t u = static_cast<std::size_t>(node);
    double theta[2] = {wide_axes[0][dims == 1 ? u : u / wide_n], dims == 2 ? wide_axes[1][u % wide_n] : 0.0};
    double lp = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double z = (theta[d] - prior.mean[d]) / prior.std[d];
      lp -= 0.5 * z * z;
    }
    if (N > 0) {
      std::vector<double> ll(N);
      for (std::size_t i = 0; i < N; ++i) {
        const double f = model == OracleModel::gaussian_mean ? theta[0] : theta[0] * data.x[i] + theta[1];
        ll[i] = gaussian_log_density(data.y[i], f, sigma);
      }
      lp -= w * scalar_cross_entropy(divergence, ll, integral);
    }
    log_post[u] = lp;
  }
  const double shift = *std::max_element(log_post.begin(), log_post.end());
  if (!std::isfinite(shift)) throw NumericError("pseudo-posterior is not finite on the grid");

  const double width0 = grid.upper[0] - grid.lower[0];
  const auto wide_w0 = trapezoid_weights(grid.lower[0] - 0.5 * width0, grid.upper[0] + 0.5 * width0, wide_n);
  std::vector<double> wide_w1{1.0};
  if (dims == 2) {
    const double width1 = grid.upper[1] - grid.lower[1];
    wide_w1 = trapezoid_weights(grid.lower[1] - 0.5 * width1, grid.upper[1] + 0.5 * width1, wide_n);
  }
  const auto w0 = trapezoid_weights(grid.lower[0], grid.upper[0], n);
  const auto w1 = dims == 2 ? trapezoid_weights(grid.lower[1], grid.upper[1], n) : std::vector<double>{1.0};
  const std::size_t off = (n - 1) / 2;  // index of grid.lower on the wide axes

  double z_all = 0.0;
  for (std::size_t a = 0; a < wide_n; ++a) {
    for (std::size_t b = 0; b < wide_w1.size(); ++b) {
      const std::size_t u = dims == 1 ? a : a * wide_n + b;
      z_all += wide_w0[a] * wide_w1[b] * std::exp(log_post[u] - shift);
    }
  }

  PseudoPosterior out;
  out.axes.push_back(linspace(grid.lower[0], grid.upper[0], n));
  if (dims == 2) out.axes.push_back(linspace(grid.lower[1], grid.upper[1], n));
  const std::size_t inner = dims == 1 ? 1 : n;
  out.density.resize(n * inner);
  double z_in = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t u = dims == 1 ? a + off : (a + off) * wide_n + (b + off);
      const double v = std::exp(log_post[u] - shift);
      out.density[a * inner + b] = v;
      z_in += w0[a] * w1[b] * v;
    }
  }
  out.outside_mass = std::max(0.0, 1.0 - z_in / z_all);
  if (out.outside_mass > kOutsideTolerance) {
    throw NumericError("pseudo-posterior mass outside the quadrature box is " + std::to_string(out.outside_mass));
  }
  for (auto& v : out.density) v /= z_in;

  out.mean.assign(dims, 0.0);
  out.std.assign(dims, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const double m = w0[a] * w1[b] * out.density[a * inner + b];
      out.mean[0] += m * out.axes[0][a];
      if (dims == 2) out.mean[1] += m * out.axes[1][b];
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const double m = w0[a] * w1[b] * out.density[a * inner + b];
      out.std[0] += m * (out.axes[0][a] - out.mean[0]) * (out.axes[0][a] - out.mean[0]);
      if (dims == 2) out.std[1] += m * (out.axes[1][b] - out.mean[1]) * (out.axes[1][b] - out.mean[1]);
    }
  }
  for (auto& v : out.std) v = std::sqrt(v);
  return out;
}

namespace {

Tensor append_row(const Tensor& a, std::span<const double> row) {
  std::vector<double> v = a.to_vector();
  v.insert(v.end(), row.begin(), row.end());
  return Tensor({a.shape()[0] + 1, a.shape()[1]}, std::move(v));
}

struct WeightedBatch {
  Batch batch;
  Tensor weights;
};

WeightedBatch contaminated_batch(const Problem& pr, const Batch& data, const Contamination* c, double eps) {
  const std::size_t N = data.size();
  const double inv_n = 1.0 / static_cast<double>(N);
  if (c == nullptr) return {data, Tensor::full({N}, inv_n)};
  if (const auto* z = std::get_if<AddPoint>(c)) {
    if (z->x.size() != pr.net.input_dim() || z->y.size() != pr.net.output_dim()) {
      throw ShapeError("contamination point does not match the model dimensions");
    }
    std::vector<double> w(N + 1, (1.0 - eps) * inv_n);
    w[N] = eps;
    return {Batch{append_row(data.inputs, z->x), append_row(data.targets, z->y)}, Tensor::vector(w)};
  }
  if (const auto* flip = std::get_if<LabelFlip>(c)) {
    if (!pr.lik.binary()) throw ConfigError("label flips need a binary likelihood");
    if (flip->index >= N) throw ShapeError("label flip index out of range");
    const std::size_t D = pr.net.input_dim();
    const auto xs = data.inputs.values();
    std::vector<double> x(xs.begin() + static_cast<std::ptrdiff_t>(flip->index * D),
                          xs.begin() + static_cast<std::ptrdiff_t>((flip->index + 1) * D));
    const double y[1] = {1.0 - data.targets[flip->index]};
    std::vector<double> w(N + 1, inv_n);
    w[flip->index] -= eps;
    w[N] = eps;
    return {Batch{append_row(data.inputs, x), append_row(data.targets, y)}, Tensor::vector(w)};
  }
  const auto& p = std::get<PerturbInput>(*c);
  if (p.index >= N || p.feature >= pr.net.input_dim()) throw ShapeError("perturbation index out of range");
  std::vector<double> x = data.inputs.to_vector();
  x[p.index * pr.net.input_dim() + p.feature] += eps;
  return {Batch{Tensor(data.inputs.shape(), std::move(x)), data.targets}, Tensor::full({N}, inv_n)};
}

struct Evaluation {
  double value = 0.0;
  std::vector<double> grad;
  bool finite = true;
};

}  // namespace

RefitResult refit_contaminated(const Problem& problem, const Batch& data, const MeanFieldGaussian& start,
                               const Contamination* contamination, double eps, const NoiseDraws& draws,
                               const RetrainOptions& options) {
  problem.validate();
  data.validate(problem.net);
  const std::size_t P = problem.net.param_count();
  start.validate(P);
  if (draws.dim != P) throw ShapeError("oracle draws do not match the parameter count");
  const WeightedBatch wb = contaminated_batch(problem, data, contamination, eps);
  const double w = problem.divergence.weight();
  const bool with_s = options.refit_scales;

  auto evaluate = [&](const std::vector<double>& x) {
    MeanFieldGaussian q{std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(P)),
                        with_s ? std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(P), x.end())
                               : start.raw_scales};
    Evaluation ev;
    try {
      const auto eg = expectation_gradient(
          q, draws,
          [&](const Tensor& theta, std::size_t) {
            return weighted_cross_entropy(problem.divergence, problem.lik, problem.net, theta, wb.batch,
                                          wb.weights);
          },
          options.execution);
      ev.value = kl_q_prior(q, problem.prior) + w * eg.value;
      ev.grad.resize(x.size());
      for (std::size_t i = 0; i < P; ++i) {
        const double var = problem.prior.std[i] * problem.prior.std[i];
        ev.grad[i] = w * eg.grad_m[i] + (q.means[i] - problem.prior.mean[i]) / var;
        if (with_s) ev.grad[P + i] = w * eg.grad_s[i] - 1.0 + std::exp(2.0 * q.raw_scales[i]) / var;
      }
    } catch (const NumericError&) {
      ev.finite = false;
    }
    ev.finite = ev.finite && std::isfinite(ev.value);
    return ev;
  };

  std::vector<double> x(start.means);
  if (with_s) x.insert(x.end(), start.raw_scales.begin(), start.raw_scales.end());
  Evaluation cur = evaluate(x);
  if (!cur.finite) throw NumericError("oracle objective is not finite at the starting point");
  double gnorm = std::sqrt(dot(cur.grad, cur.grad));
  double alpha = 1.0 / std::max(1.0, gnorm);
  std::size_t it = 0;
  std::vector<double> trial(x.size());
  for (; it < options.max_iter && gnorm > options.grad_tol; ++it) {
    Evaluation next;
    for (;;) {
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - alpha * cur.grad[i];
      next = evaluate(trial);
      // Armijo with a round-off allowance so that steps near the optimum are
      // not rejected for differences below double precision.
      const double allowance = 1e-13 * std::abs(cur.value);
      if (next.finite && next.value <= cur.value - 1e-4 * alpha * gnorm * gnorm + allowance) break;
      alpha *= 0.5;
      if (alpha < 1e-300) throw NumericError("oracle line search failed at gradient norm " + std::to_string(gnorm));
    }
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double si = trial[i] - x[i];
      const double yi = next.grad[i] - cur.grad[i];
      ss += si * si;
      sy += si * yi;
    }
    x = trial;
    cur = std::move(next);
    gnorm = std::sqrt(dot(cur.grad, cur.grad));
    alpha = sy > 0.0 ? ss / sy : 2.0 * alpha;
  }
  if (gnorm > options.grad_tol) {
    throw NumericError("oracle refit did not converge: gradient norm " + std::to_string(gnorm) + " after " +
                       std::to_string(it) + " iterations");
  }
  RefitResult r;
  r.q.means.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(P));
  r.q.raw_scales = with_s ? std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(P), x.end()) : start.raw_scales;
  r.value = cur.value;
  r.grad_norm = gnorm;
  r.iterations = it;
  return r;
}

RetrainResult retrain_if_oracle(const Problem& problem, const Batch& data, const MeanFieldGaussian& start,
                                const Contamination& contamination, const NoiseDraws& draws,
                                const RetrainOptions& options) {
  if (options.scaled_eps.empty()) throw ConfigError("retraining oracle needs at least one eps");
  for (double e : options.scaled_eps) {
    if (!(e > 0.0)) throw ConfigError("retraining eps values must be positive");
  }
  const double N = static_cast<double>(data.size());
  const RefitResult base = refit_contaminated(problem, data, start, nullptr, 0.0, draws, options);
  RetrainResult out;
  out.base = base.q;
  out.base_grad_norm = base.grad_norm;
  out.iterations = base.iterations;
  const std::size_t P = base.q.dim();
  const std::size_t len = options.refit_scales ? 2 * P : P;
  for (double scaled : options.scaled_eps) {
    const double eps = scaled / N;
    const RefitResult r = refit_contaminated(problem, data, base.q, &contamination, eps, draws, options);
    out.iterations += r.iterations;
    std::vector<double> est(len);
    for (std::size_t i = 0; i < P; ++i) est[i] = (r.q.means[i] - base.q.means[i]) / eps;
    if (options.refit_scales) {
      for (std::size_t i = 0; i < P; ++i) est[P + i] = (r.q.raw_scales[i] - base.q.raw_scales[i]) / eps;
    }
    out.eps.push_back(eps);
    out.estimates.push_back(std::move(est));
  }

  // Least-squares line in eps per component; its intercept removes the
  // first-order finite-eps bias.
  const std::size_t k = out.eps.size();
  out.extrapolated.assign(len, 0.0);
  if (k == 1) {
    out.extrapolated = out.estimates[0];
    return out;
  }
  double me = 0.0;
  for (double e : out.eps) me += e / static_cast<double>(k);
  double see = 0.0;
  for (double e : out.eps) see += (e - me) * (e - me);
  for (std::size_t i = 0; i < len; ++i) {
    double md = 0.0, sed = 0.0;
    for (std::size_t j = 0; j < k; ++j) md += out.estimates[j][i] / static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) sed += (out.eps[j] - me) * (out.estimates[j][i] - md);
    const double slope = see > 0.0 ? sed / see : 0.0;
    out.extrapolated[i] = md - slope * me;
  }
  return out;
}

EstimatingEquationResult estimating_equation_check(double mu_true, double sigma_true, double beta,
                                                   std::size_t n_mc, std::uint64_t seed,
                                                   std::optional<std::pair<double, double>> eval) {
  if (!(sigma_true > 0.0)) throw ConfigError("sigma must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (n_mc < 2) throw ConfigError("estimating-equation check needs at least two samples");
  const double mu = eval ? eval->first : mu_true;
  const double sigma = eval ? eval->second : sigma_true;
  if (!(sigma > 0.0)) throw ConfigError("evaluation sigma must be positive");
  // int p^(1+beta) score dx: zero for mu; -c beta / ((1 + beta) sigma) for sigma,
  // with c = int p^(1+beta) dx.
  const double c = std::pow(1.0 + beta, -0.5) * std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * beta);
  const double correction[2] = {0.0, -c * beta / ((1.0 + beta) * sigma)};

  Rng rng(seed);
  std::normal_distribution<double> normal(mu_true, sigma_true);
  double mean[2] = {0.0, 0.0}, m2[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double x = normal(rng);
    const double r = (x - mu) / sigma;
    const double weight = beta == 0.0 ? 1.0 : std::exp(beta * gaussian_log_density(x, mu, sigma));
    const double u[2] = {weight * r / sigma - correction[0], weight * (r * r - 1.0) / sigma - correction[1]};
    const double cnt = static_cast<double>(i + 1);
    for (int d = 0; d < 2; ++d) {
      const double delta = u[d] - mean[d];
      mean[d] += delta / cnt;
      m2[d] += delta * (u[d] - mean[d]);
    }
  }
  EstimatingEquationResult out;
  out.samples = n_mc;
  const double n = static_cast<double>(n_mc);
  for (int d = 0; d < 2; ++d) {
    out.mean.push_back(mean[d]);
    out.std_error.push_back(std::sqrt(m2[d] / (n - 1.0) / n));
  }
  return out;
}

nlohmann::json to_json(const PseudoPosterior& p, bool include_density) {
  nlohmann::json j{{"mean", p.mean}, {"std", p.std}, {"outside_mass", p.outside_mass}};
  if (include_density) {
    j["axes"] = p.axes;
    j["density"] = p.density;
  }
  return j;
}

nlohmann::json to_json(const RetrainResult& r) {
  return nlohmann::json{{"eps", r.eps},
                        {"estimates", r.estimates},
                        {"extrapolated", r.extrapolated},
                        {"base_means", r.base.means},
                        {"base_grad_norm", r.base_grad_norm},
                        {"iterations", r.iterations}};
}

nlohmann::json to_json(const EstimatingEquationResult& r) {
  return nlohmann::json{{"parameters", {"mu", "sigma"}},
                        {"mean", r.mean},
                        {"std_error", r.std_error},
                        {"samples", r.samples}};
}

}  // namespace rvi
