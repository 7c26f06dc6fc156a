#pragma once

// Random differentiable graphs and central finite-difference references,
// shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rvi/tensor.hpp"

namespace rvi::testing {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

inline double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

inline std::vector<double> flatten(const std::vector<Tensor>& ts) {
  std::vector<double> out;
  for (const auto& t : ts) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

inline std::vector<Tensor> unflatten(const std::vector<double>& flat, const std::vector<Tensor>& like) {
  std::vector<Tensor> out;
  std::size_t k = 0;
  for (const auto& t : like) {
    std::vector<double> v(flat.begin() + static_cast<std::ptrdiff_t>(k),
                          flat.begin() + static_cast<std::ptrdiff_t>(k + t.size()));
    k += t.size();
    out.emplace_back(t.shape(), std::move(v));
  }
  return out;
}

inline double eval_constant(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  return f(inputs).item();
}

inline std::vector<double> tape_gradient(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Tensor> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Tensor out = f(vars);
  return flatten(tape.gradient(out, vars));
}

inline std::vector<double> fd_gradient(const ScalarFn& f, const std::vector<Tensor>& inputs, double h) {
  auto flat = flatten(inputs);
  std::vector<double> g(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double x0 = flat[i];
    flat[i] = x0 + h;
    const double fp = eval_constant(f, unflatten(flat, inputs));
    flat[i] = x0 - h;
    const double fm = eval_constant(f, unflatten(flat, inputs));
    flat[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> tape_hvp(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                    const std::vector<double>& v) {
  Tape tape;
  std::vector<Tensor> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Tensor out = f(vars);
  const auto vs = unflatten(v, inputs);
  return flatten(hessian_vector_product(out, vars, vs));
}

// (grad f(x + h v) - grad f(x - h v)) / 2h
inline std::vector<double> fd_hvp(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                  const std::vector<double>& v, double h) {
  auto flat = flatten(inputs);
  auto shifted = [&](double sign) {
    std::vector<double> x(flat.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = flat[i] + sign * h * v[i];
    return tape_gradient(f, unflatten(x, inputs));
  };
  const auto gp = shifted(1.0);
  const auto gm = shifted(-1.0);
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
  return out;
}

// A random composition of every primitive over two leaves x:[3,3], w:[3].
// The op sequence is fixed by `seed`, so the same graph is rebuilt for any
// input values. Arguments are routed through bounded maps so that log, pow
// and div stay inside their domains.
struct RandomGraph {
  unsigned seed;
  int depth = 8;

  Tensor operator()(const std::vector<Tensor>& in) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_op(0, 15);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const Tensor& x = in[0];
    const Tensor& w = in[1];
    std::vector<Tensor> pool{x, broadcast_to(w, {3, 3}), x * w};
    auto pick = [&]() -> const Tensor& {
      std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
      return pool[d(rng)];
    };
    for (int step = 0; step < depth; ++step) {
      const Tensor a = pick();
      const Tensor b = pick();
      Tensor r;
      switch (pick_op(rng)) {
        case 0: r = a + b; break;
        case 1: r = a - b * 0.5; break;
        case 2: r = tanh(a) * b; break;
        case 3: r = a / (2.0 + sigmoid(b)); break;
        case 4: r = exp(tanh(a)); break;
        case 5: r = log(softplus(a) + 0.5); break;
        case 6: r = pow(softplus(a) + 0.5, 2.5 * unif(rng) + 0.5); break;
        case 7: r = relu(a + 0.3 * unif(rng)); break;
        case 8: r = matmul(tanh(a), b) * 0.5; break;
        case 9: r = transpose(a) + sum_to(b, {3}); break;
        case 10: r = a * mean(tanh(b)); break;
        case 11: r = reshape(pad(slice(a, 2, 5), 1, 9), {3, 3}) - b; break;
        case 12: r = expand_last(sum_last(tanh(a)), 3) + b; break;
        case 13: r = -softplus(a) + square(tanh(b)); break;
        case 14: r = broadcast_to(reshape(sum(sigmoid(a)), {1}), {3, 3}) * 0.2 + b; break;
        default: r = log_sigmoid(a) * b; break;
      }
      pool.push_back(tanh(r) * 2.0);
    }
    Tensor out = Tensor::scalar(0.0);
    const std::size_t keep = std::min<std::size_t>(3, pool.size());
    for (std::size_t i = pool.size() - keep; i < pool.size(); ++i) {
      out = out + sum(pool[i] * pool[i]) * 0.1 + sum(pool[i]);
    }
    return out;
  }

  static std::vector<Tensor> random_inputs(unsigned seed) {
    std::mt19937_64 rng(seed * 7919u + 1u);
    std::normal_distribution<double> n01;
    std::vector<double> x(9), w(3);
    for (auto& v : x) v = n01(rng);
    for (auto& v : w) v = n01(rng);
    return {Tensor({3, 3}, x), Tensor({3}, w)};
  }
};

}  // namespace rvi::testing
