#include <gtest/gtest.h>

#include <cmath>

#include "fd_check.hpp"
#include "rvi/influence.hpp"
#include "rvi/meanfield.hpp"

using namespace rvi;
using rvi::testing::rel_error;

namespace {

constexpr std::size_t kN = 40;

Batch regression_data() {
  Rng rng(11);
  std::normal_distribution<double> n01;
  std::vector<double> x(kN * 2), y(kN);
  for (auto& v : x) v = n01(rng);
  for (std::size_t i = 0; i < kN; ++i) y[i] = 1.5 * x[2 * i] - 0.5 * x[2 * i + 1] + 0.2 + 0.3 * n01(rng);
  return Batch{Tensor({kN, 2}, x), Tensor({kN, 1}, y)};
}

Batch classification_data() {
  Rng rng(12);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(kN * 2), y(kN);
  for (auto& v : x) v = n01(rng);
  for (std::size_t i = 0; i < kN; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(2.0 * x[2 * i] - x[2 * i + 1])));
    y[i] = u(rng) < p ? 1.0 : 0.0;
  }
  return Batch{Tensor({kN, 2}, x), Tensor({kN, 1}, y)};
}

InfluenceOptions small_options() {
  InfluenceOptions o;
  o.gradient_mc = 30;
  o.hessian_mc = 30;
  o.cg_tol = 1e-10;
  o.execution = Execution::serial;
  return o;
}

InfluenceContext make_context(DivergenceConfig div, bool classification, InfluenceOptions o = small_options()) {
  const Batch b = classification ? classification_data() : regression_data();
  const Problem p{NetworkSpec::linear(2), classification ? LikelihoodSpec::logistic() : LikelihoodSpec::gaussian(0.3),
                  PriorSpec::standard(3), div};
  TrainConfig t;
  t.epochs = 400;
  t.batch_size = kN;
  t.learning_rate = 0.05;
  auto q = fit(p, b, t).q;
  return InfluenceContext(p, std::move(q), b, o);
}

std::vector<double> scaled(std::vector<double> v, double a) {
  for (auto& e : v) e *= a;
  return v;
}

}  // namespace

TEST(ConjugateGradient, SolvesDiagonalSystem) {
  const std::vector<double> d{1.0, 2.0, 5.0, 10.0, 0.5};
  const std::vector<double> b{1.0, -3.0, 0.25, 7.0, 2.0};
  const auto r = conjugate_gradient(
      [&](std::span<const double> v) {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = d[i] * v[i];
        return out;
      },
      b, 1e-12, 100);
  ASSERT_TRUE(r.converged);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(r.x[i], b[i] / d[i], 1e-8);
  EXPECT_LT(r.residual, 1e-10);
}

TEST(ConjugateGradient, FlagsNegativeCurvature) {
  const auto r = conjugate_gradient(
      [](std::span<const double> v) { return std::vector<double>{v[0], -v[1]}; },
      std::vector<double>{0.0, 1.0}, 1e-10, 10);
  EXPECT_TRUE(r.indefinite);
  EXPECT_FALSE(r.converged);
}

TEST(Influence, ZeroGradientGivesZeroInfluence) {
  const auto ctx = make_context(DivergenceConfig::kl(kN), false);
  const auto r = influence_from_gradient(ctx, std::vector<double>(ctx.dim(), 0.0));
  for (double v : r.if_vector) EXPECT_EQ(v, 0.0);
}

TEST(Influence, LinearInTheGradient) {
  const auto ctx = make_context(DivergenceConfig::beta(0.2, kN), false);
  const auto g = outlier_gradient(ctx, AddPoint{{0.5, -1.0}, {4.0}});
  const auto a = influence_from_gradient(ctx, g).if_vector;
  const auto b = influence_from_gradient(ctx, scaled(g, -3.0)).if_vector;
  EXPECT_LT(rel_error(b, scaled(a, -3.0)), 1e-10);
}

TEST(Influence, SolveResidualIsSmall) {
  const auto ctx = make_context(DivergenceConfig::kl(kN), false);
  const auto r = influence_vector(ctx, AddPoint{{1.0, 1.0}, {10.0}});
  EXPECT_TRUE(r.cg.converged);
  EXPECT_LT(r.cg.residual, 1e-6);
  // Residual of the returned vector, recomputed independently.
  const auto hx = ctx.damped_hvp(scaled(r.if_vector, -1.0));
  EXPECT_LT(rel_error(hx, r.gradient), 1e-6);
}

TEST(OutlierGradient, AdditiveMatchesGenericForRegression) {
  for (auto div : {DivergenceConfig::kl(kN), DivergenceConfig::beta(0.3, kN), DivergenceConfig::gamma_transformed(0.3, kN)}) {
    const auto ctx = make_context(div, false);
    for (const Contamination& c : {Contamination{AddPoint{{2.0, -1.0}, {3.0}}}, Contamination{PerturbInput{5, 1}}}) {
      EXPECT_LT(rel_error(outlier_gradient(ctx, c), outlier_gradient_generic(ctx, c)), 1e-9)
          << div.label() << " " << contamination_label(c);
    }
  }
}

TEST(OutlierGradient, AdditiveMatchesGenericForLabelFlip) {
  for (auto div : {DivergenceConfig::kl(kN), DivergenceConfig::beta(0.3, kN), DivergenceConfig::gamma_transformed(0.3, kN)}) {
    const auto ctx = make_context(div, true);
    EXPECT_LT(rel_error(outlier_gradient(ctx, LabelFlip{3}), outlier_gradient_generic(ctx, LabelFlip{3})), 1e-9)
        << div.label();
  }
}

TEST(OutlierGradient, OriginalGammaNeedsGenericRoute) {
  const auto ctx = make_context(DivergenceConfig::gamma_original(0.3, kN), false);
  EXPECT_THROW(outlier_gradient(ctx, AddPoint{{0.0, 0.0}, {1.0}}), UnsupportedError);
  const auto r = influence_vector(ctx, AddPoint{{0.0, 0.0}, {1.0}});
  EXPECT_EQ(r.if_vector.size(), ctx.dim());
  EXPECT_TRUE(r.cg.converged);
}

TEST(OutlierGradient, GaussianPowerIntegralHasNoGradient) {
  const auto ctx = make_context(DivergenceConfig::beta(0.2, kN), false);
  const Problem& pr = ctx.problem();
  const Batch z{Tensor({1, 2}, {3.0, -2.0}), Tensor({1, 1}, {50.0})};
  const auto g = ctx.expected_gradient([&](const Tensor& theta, std::size_t) {
    return sum(power_integral(pr.lik, forward(pr.net, theta, z.inputs), 1.2));
  });
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(OutlierGradient, ZeroInputLeavesWeightsToTheData) {
  // With x = 0 the point term carries no weight gradient, so g on the weights
  // is exactly the removed data term.
  const auto ctx = make_context(DivergenceConfig::kl(kN), false);
  const auto g = outlier_gradient(ctx, AddPoint{{0.0, 0.0}, {25.0}});
  const double w = ctx.problem().divergence.weight();
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(g[j], -w * ctx.data_gradient()[j], 1e-12 * (1.0 + std::abs(g[j])));
  }
  EXPECT_GT(std::abs(g[2] + w * ctx.data_gradient()[2]), 1.0);
}

TEST(OutlierGradient, LabelFlipBackNegates) {
  for (auto div : {DivergenceConfig::kl(kN), DivergenceConfig::beta(0.3, kN)}) {
    const auto ctx = make_context(div, true);
    auto targets = ctx.data().targets.to_vector();
    targets[7] = 1.0 - targets[7];
    const Batch flipped{ctx.data().inputs, Tensor(ctx.data().targets.shape(), targets)};
    const InfluenceContext back(ctx.problem(), ctx.q(), flipped, ctx.options());
    const auto a = outlier_gradient(ctx, LabelFlip{7});
    const auto b = outlier_gradient(back, LabelFlip{7});
    EXPECT_LT(rel_error(b, scaled(a, -1.0)), 1e-12) << div.label();
    const auto ia = influence_from_gradient(ctx, a).if_vector;
    const auto ib = influence_from_gradient(back, b).if_vector;
    if (div.kind == DivergenceKind::kl) {
      // The logistic log-likelihood Hessian does not depend on the label.
      EXPECT_LT(rel_error(ib, scaled(ia, -1.0)), 1e-8);
    } else {
      // The Hessians differ by one point, so the influences negate to first order.
      EXPECT_LT(rel_error(ib, scaled(ia, -1.0)), 0.25);
    }
  }
}

TEST(PredictiveInfluence, VanishesForZeroOrOrthogonalInfluence) {
  const std::vector<double> t{1.0, -2.0, 0.5};
  EXPECT_EQ(predictive_influence(t, std::vector<double>{0.0, 0.0, 0.0}), 0.0);
  EXPECT_EQ(predictive_influence(t, std::vector<double>{2.0, 1.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(predictive_influence(t, std::vector<double>{1.0, 1.0, 2.0}), 0.0);
  EXPECT_THROW(predictive_influence(t, std::vector<double>{1.0}), ShapeError);
}

TEST(Sweep, DefaultGridContainsOriginal) {
  const auto g = default_sweep_grid(0.37);
  EXPECT_EQ(g.size(), 15u);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_NE(std::find(g.begin(), g.end(), 0.37), g.end());
  EXPECT_EQ(default_sweep_grid(10.0).size(), 14u);
}

TEST(Sweep, OriginalMagnitudeMatchesDirectQuery) {
  for (auto div : {DivergenceConfig::kl(kN), DivergenceConfig::beta(0.2, kN), DivergenceConfig::gamma_original(0.2, kN)}) {
    const auto ctx = make_context(div, false);
    const Batch test = regression_data();
    const auto base_x = take_rows(ctx.data(), std::vector<std::size_t>{4}).inputs.to_vector();
    const double base_y = ctx.data().targets[4];
    SweepSpec spec{4, SweepAxis::output, 0, {base_y}, test};
    const InfluenceContext* methods[] = {&ctx};
    const auto pts = outlier_sweep(methods, spec);
    ASSERT_EQ(pts.size(), 1u);
    const auto direct = influence_vector(ctx, AddPoint{base_x, {base_y}});
    const double expected = predictive_influence(ctx, direct.if_vector, test);
    EXPECT_NEAR(pts[0].predictive_influence, expected, 1e-7 * (1.0 + std::abs(expected))) << div.label();
  }
}

TEST(Sweep, KlGrowsAndBetaDecaysInTheOutput) {
  const auto kl = make_context(DivergenceConfig::kl(kN), false);
  const auto beta = make_context(DivergenceConfig::beta(0.2, kN), false);
  SweepSpec spec{0, SweepAxis::output, 0, {1e2, 1e4, 1e6}, regression_data()};
  const InfluenceContext* methods[] = {&kl, &beta};
  const auto pts = outlier_sweep(methods, spec);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_GT(pts[1].log10_abs_point_influence, pts[0].log10_abs_point_influence + 1.5);
  EXPECT_GT(pts[2].log10_abs_point_influence, pts[1].log10_abs_point_influence + 1.5);
  EXPECT_LT(pts[4].log10_abs_point_influence, pts[3].log10_abs_point_influence - 100.0);
  EXPECT_LT(pts[5].log10_abs_point_influence, pts[4].log10_abs_point_influence - 100.0);
  EXPECT_TRUE(std::isfinite(pts[5].log10_abs_point_influence));
}

TEST(LabelFlip, AverageMatchesPerPointQueries) {
  for (auto div : {DivergenceConfig::kl(kN), DivergenceConfig::beta(0.3, kN)}) {
    const auto ctx = make_context(div, true);
    const Batch test = classification_data();
    const auto summary = label_flip_average(ctx, test);
    double mean = 0.0;
    for (std::size_t i = 0; i < kN; ++i) {
      const auto r = influence_from_gradient(ctx, outlier_gradient_generic(ctx, LabelFlip{i}));
      mean += predictive_influence(ctx, r.if_vector, test) / kN;
    }
    EXPECT_NEAR(summary.average, mean / kN, 1e-7 * std::abs(mean / kN)) << div.label();
    EXPECT_EQ(summary.n_train, kN);
  }
}

TEST(LabelFlip, NeedsBinaryLikelihood) {
  const auto ctx = make_context(DivergenceConfig::kl(kN), false);
  EXPECT_THROW(label_flip_average(ctx, regression_data()), ConfigError);
}

TEST(Damping, EscalatesUntilTheSolveConverges) {
  auto o = small_options();
  o.cg_max_iter = 1;
  o.cg_tol = 1e-3;
  o.max_damping = 1e8;
  const auto ctx = make_context(DivergenceConfig::kl(kN), false, o);
  const auto g = outlier_gradient(ctx, AddPoint{{1.0, 0.0}, {2.0}});
  const auto r = ctx.solve(g);
  EXPECT_TRUE(r.converged);
  EXPECT_GT(r.damping, o.damping);
  EXPECT_NEAR(std::log10(r.damping / o.damping), std::round(std::log10(r.damping / o.damping)), 1e-9);

  o.max_damping = 0.0;
  const InfluenceContext fixed(ctx.problem(), ctx.q(), ctx.data(), o);
  const auto f = fixed.solve(g);
  EXPECT_FALSE(f.converged);
  EXPECT_EQ(f.damping, o.damping);
}

TEST(Damping, OptionsAreValidated) {
  auto o = small_options();
  o.max_damping = -1.0;
  EXPECT_THROW(make_context(DivergenceConfig::kl(kN), false, o), ConfigError);
  o = small_options();
  o.damping = -1e-3;
  EXPECT_THROW(make_context(DivergenceConfig::kl(kN), false, o), ConfigError);
  o = small_options();
  o.hessian_mc = 0;
  EXPECT_THROW(make_context(DivergenceConfig::kl(kN), false, o), ConfigError);
}
