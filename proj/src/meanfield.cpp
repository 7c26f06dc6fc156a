#include "rvi/meanfield.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

namespace rvi {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (mc_samples < 1) throw ConfigError("mc_samples must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient size mismatch");
  if (state.first.empty()) {
    state.first.assign(params.size(), 0.0);
    state.second.assign(params.size(), 0.0);
  }
  if (state.first.size() != params.size()) throw ShapeError("adam_step: state size mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first[i] = state.beta1 * state.first[i] + (1.0 - state.beta1) * grads[i];
    state.second[i] = state.beta2 * state.second[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.first[i] / c1;
    const double vhat = state.second[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

Batch take_rows(const Batch& data, std::span<const std::size_t> index) {
  const std::size_t D = data.inputs.shape()[1];
  const std::size_t K = data.targets.shape()[1];
  std::vector<double> x(index.size() * D), y(index.size() * K);
  const auto xs = data.inputs.values();
  const auto ys = data.targets.values();
  for (std::size_t r = 0; r < index.size(); ++r) {
    const std::size_t i = index[r];
    if (i >= data.size()) throw ShapeError("take_rows: index out of range");
    std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(i * D), D, x.begin() + static_cast<std::ptrdiff_t>(r * D));
    std::copy_n(ys.begin() + static_cast<std::ptrdiff_t>(i * K), K, y.begin() + static_cast<std::ptrdiff_t>(r * K));
  }
  return Batch{Tensor({index.size(), D}, std::move(x)), Tensor({index.size(), K}, std::move(y))};
}

FitResult fit(const Problem& problem, const Batch& data, const TrainConfig& train) {
  Rng rng(train.seed);
  auto q = MeanFieldGaussian::initialize(problem.net.param_count(), rng);
  return fit(problem, data, train, std::move(q));
}

FitResult fit(const Problem& problem, const Batch& data, const TrainConfig& train,
              MeanFieldGaussian initial) {
  problem.validate();
  train.validate();
  data.validate(problem.net);
  validate_targets(problem.lik, data.targets);
  const std::size_t N = data.size();
  const std::size_t P = problem.net.param_count();
  initial.validate(P);
  const bool full_batch = train.batch_size >= N;
  if (problem.divergence.kind == DivergenceKind::gamma_original && !full_batch) {
    throw ConfigError("gamma_original training needs batch_size >= number of points");
  }

  // Separate stream from the initializer so warm starts stay reproducible.
  Rng rng(train.seed ^ 0x9e3779b97f4a7c15ULL);
  FitResult result{std::move(initial), {}};
  auto& q = result.q;
  std::vector<double> params(2 * P);
  std::vector<double> grads(2 * P);
  AdamState adam;
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    if (!full_batch) std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < N; start += train.batch_size) {
      const std::size_t stop = std::min(N, start + train.batch_size);
      const Batch batch = full_batch ? data
                                     : take_rows(data, std::span<const std::size_t>(order).subspan(start, stop - start));
      const auto draws = NoiseDraws::draw(train.mc_samples, P, rng);
      ObjectiveGradient og;
      try {
        og = objective_and_gradient(problem, q, batch, draws, train.execution);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(steps) + " (" + problem.divergence.label() + " data term): " +
                           e.what());
      }
      if (!std::isfinite(og.value)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ": non-finite objective (kl=" + std::to_string(og.kl) +
                           ", data=" + std::to_string(og.data_term) + ")");
      }
      epoch_sum += og.value;
      ++steps;
      std::copy(q.means.begin(), q.means.end(), params.begin());
      std::copy(q.raw_scales.begin(), q.raw_scales.end(), params.begin() + static_cast<std::ptrdiff_t>(P));
      std::copy(og.grad_m.begin(), og.grad_m.end(), grads.begin());
      std::copy(og.grad_s.begin(), og.grad_s.end(), grads.begin() + static_cast<std::ptrdiff_t>(P));
      adam_step(adam, params, grads, train.learning_rate);
      std::copy_n(params.begin(), P, q.means.begin());
      std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(P), P, q.raw_scales.begin());
    }
    result.trace.push_back(epoch_sum / static_cast<double>(steps));
  }
  return result;
}

Prediction predict(const MeanFieldGaussian& q, const NetworkSpec& net, const LikelihoodSpec& lik,
                   const Tensor& inputs, const Tensor* targets, std::size_t mc_samples, Rng& rng) {
  if (mc_samples < 1) throw ConfigError("predict needs at least one sample");
  q.validate(net.param_count());
  const Tensor m = Tensor::vector(q.means);
  const Tensor s = Tensor::vector(q.raw_scales);
  const std::size_t B = inputs.shape().at(0);
  const std::size_t K = net.output_dim();
  Prediction out;
  out.mean.assign(B * K, 0.0);
  std::vector<std::vector<double>> ll;
  const double inv = 1.0 / static_cast<double>(mc_samples);
  for (std::size_t k = 0; k < mc_samples; ++k) {
    const Tensor theta = sample_theta(m, s, rng);
    const Tensor f = forward(net, theta, inputs);
    const Tensor summary = lik.binary() ? sigmoid(f) : f;
    if (lik.binary() && lik.kind == LikelihoodKind::robust_logistic) {
      const Tensor p = lik.epsilon + (1.0 - 2.0 * lik.epsilon) * summary;
      for (std::size_t i = 0; i < out.mean.size(); ++i) out.mean[i] += p[i] * inv;
    } else {
      for (std::size_t i = 0; i < out.mean.size(); ++i) out.mean[i] += summary[i] * inv;
    }
    if (targets != nullptr) ll.push_back(log_likelihood(lik, f, *targets).to_vector());
  }
  if (targets != nullptr) {
    out.log_mean_likelihood.resize(B);
    out.mean_log_likelihood.assign(B, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
      double mx = ll[0][i];
      for (const auto& row : ll) mx = std::max(mx, row[i]);
      double acc = 0.0;
      for (const auto& row : ll) {
        acc += std::exp(row[i] - mx);
        out.mean_log_likelihood[i] += row[i] * inv;
      }
      out.log_mean_likelihood[i] = mx + std::log(acc * inv);
    }
  }
  return out;
}

double rmse(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size() || predicted.empty()) throw ShapeError("rmse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - target[i]) * (predicted[i] - target[i]);
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

double accuracy(std::span<const double> prob_one, std::span<const double> labels) {
  if (prob_one.size() != labels.size() || labels.empty()) throw ShapeError("accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += ((prob_one[i] >= 0.5) == (labels[i] == 1.0));
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

CvResult cross_validate(std::span<const double> grid, std::size_t folds, const Problem& base,
                        const Batch& data, const TrainConfig& train, std::size_t predict_mc) {
  if (grid.empty()) throw ConfigError("cross-validation grid is empty");
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (base.divergence.kind == DivergenceKind::kl) throw ConfigError("cross-validation needs a beta or gamma divergence");
  const std::size_t N = data.size();
  if (N / folds < 1) throw ConfigError("too few points for " + std::to_string(folds) + " folds");

  Rng split_rng(train.seed + 0x51ed2701ULL);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);

  std::vector<std::vector<std::size_t>> fold_val(folds), fold_train(folds);
  for (std::size_t r = 0; r < N; ++r) fold_val[r % folds].push_back(order[r]);
  for (std::size_t f = 0; f < folds; ++f) {
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) fold_train[f].insert(fold_train[f].end(), fold_val[g].begin(), fold_val[g].end());
    }
    std::sort(fold_train[f].begin(), fold_train[f].end());
    if (base.divergence.kind == DivergenceKind::gamma_original && train.batch_size < fold_train[f].size()) {
      throw ConfigError("gamma_original cross-validation needs batch_size >= fold training size");
    }
  }

  const bool classify = base.lik.binary();
  const std::size_t cells = grid.size() * folds;
  std::vector<double> cell_score(cells);
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(cells);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    try {
      const std::size_t gi = static_cast<std::size_t>(c) / folds;
      const std::size_t f = static_cast<std::size_t>(c) % folds;
      Problem p = base;
      p.divergence = base.divergence.with_power(grid[gi]);
      p.divergence.n_total = fold_train[f].size();
      TrainConfig t = train;
      t.seed = train.seed + 1000003ULL * (f + 1);
      t.execution = Execution::serial;
      const Batch tr = take_rows(data, fold_train[f]);
      const Batch va = take_rows(data, fold_val[f]);
      const auto fitted = fit(p, tr, t);
      Rng prng(t.seed + 17);
      const auto pred = predict(fitted.q, p.net, p.lik, va.inputs, nullptr, predict_mc, prng);
      cell_score[static_cast<std::size_t>(c)] =
          classify ? accuracy(pred.mean, va.targets.values()) : rmse(pred.mean, va.targets.values());
    } catch (...) {
#pragma omp critical(rvi_cv_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  CvResult result;
  result.grid.assign(grid.begin(), grid.end());
  result.higher_is_better = classify;
  result.scores.assign(grid.size(), 0.0);
  for (std::size_t c = 0; c < cells; ++c) result.scores[c / folds] += cell_score[c] / static_cast<double>(folds);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = result.scores[i], b = result.scores[best];
    const bool better = classify ? a > b : a < b;
    if (better || (a == b && grid[i] < grid[best])) best = i;
  }
  result.best = grid[best];
  return result;
}

}  // namespace rvi
