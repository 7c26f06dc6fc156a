// Serial reference vs OpenMP paths of the Monte Carlo kernels.
#include <benchmark/benchmark.h>

#include "rvi/mc_kernels.hpp"

using namespace rvi;

namespace {

struct Setup {
  Problem problem;
  Batch batch;
  MeanFieldGaussian q;
  NoiseDraws draws;
  std::vector<double> v;
};

const Setup& setup() {
  static const Setup s = [] {
    const NetworkSpec net = NetworkSpec::mlp({8, 50, 50, 1}, Activation::relu);
    const std::size_t P = net.param_count();
    const std::size_t N = 512;
    Rng rng(1);
    std::normal_distribution<double> n01;
    std::vector<double> x(N * 8), y(N);
    for (auto& e : x) e = n01(rng);
    for (auto& e : y) e = n01(rng);
    MeanFieldGaussian q = MeanFieldGaussian::initialize(P, rng);
    std::vector<double> v(P);
    for (auto& e : v) e = n01(rng);
    return Setup{Problem{net, LikelihoodSpec::gaussian(1.0), PriorSpec::standard(P), DivergenceConfig::beta(0.1, N)},
                 Batch{Tensor({N, 8}, x), Tensor({N, 1}, y)}, q, NoiseDraws::draw(32, P, rng), v};
  }();
  return s;
}

void BM_ObjectiveGradient(benchmark::State& state, Execution exec) {
  const Setup& s = setup();
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective_and_gradient(s.problem, s.q, s.batch, s.draws, exec));
  }
  state.counters["threads"] = exec == Execution::parallel ? max_threads() : 1;
}

void BM_ObjectiveHvp(benchmark::State& state, Execution exec) {
  const Setup& s = setup();
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective_hvp(s.problem, s.q, s.batch, s.draws, s.v, HessianScope::means, exec));
  }
  state.counters["threads"] = exec == Execution::parallel ? max_threads() : 1;
}

}  // namespace

BENCHMARK_CAPTURE(BM_ObjectiveGradient, serial, Execution::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ObjectiveGradient, parallel, Execution::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ObjectiveHvp, serial, Execution::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ObjectiveHvp, parallel, Execution::parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
