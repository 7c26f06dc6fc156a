#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fd_check.hpp"
#include "rvi/objectives.hpp"

using namespace rvi;

namespace {

constexpr double kPi = std::numbers::pi;

double gauss_logpdf(double y, double f, double s) {
  return -0.5 * std::log(2.0 * kPi * s * s) - 0.5 * (y - f) * (y - f) / (s * s);
}

}  // namespace

TEST(Network, ParamCountAndLayout) {
  const auto net = NetworkSpec::mlp({3, 4, 2}, Activation::relu);
  EXPECT_EQ(net.param_count(), 3u * 4 + 4 + 4 * 2 + 2);
  const auto layers = net.layers();
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[0].bias_offset, 12u);
  EXPECT_EQ(layers[1].weight_offset, 16u);
  EXPECT_EQ(NetworkSpec::linear(5).param_count(), 6u);
  EXPECT_EQ((NetworkSpec{{0, 1}, Activation::linear}).param_count(), 1u);
  EXPECT_THROW((NetworkSpec{{3}, Activation::relu}).validate(), ConfigError);
}

TEST(Network, LinearForwardIsAffine) {
  const auto net = NetworkSpec::linear(2);
  const Tensor theta = Tensor::vector({2.0, -1.0, 0.5});
  const Tensor x = Tensor::matrix(2, 2, {1.0, 3.0, -2.0, 0.0});
  EXPECT_EQ(forward(net, theta, x).to_vector(), (std::vector<double>{-0.5, -3.5}));
}

TEST(Network, HiddenActivations) {
  // One hidden unit with weight 1, bias -1, then identity output.
  const Tensor theta = Tensor::vector({1.0, -1.0, 1.0, 0.0});
  const Tensor x = Tensor::matrix(2, 1, {0.5, 3.0});
  const auto relu_out = forward(NetworkSpec::mlp({1, 1, 1}, Activation::relu), theta, x).to_vector();
  EXPECT_EQ(relu_out, (std::vector<double>{0.0, 2.0}));
  const auto tanh_out = forward(NetworkSpec::mlp({1, 1, 1}, Activation::tanh), theta, x).to_vector();
  EXPECT_DOUBLE_EQ(tanh_out[0], std::tanh(-0.5));
  EXPECT_DOUBLE_EQ(tanh_out[1], std::tanh(2.0));
}

TEST(Network, BiasOnlyModelIgnoresInputs) {
  const NetworkSpec net{{0, 1}, Activation::linear};
  const auto f = forward(net, Tensor::vector({1.25}), Tensor({3, 0}, std::vector<double>{}));
  EXPECT_EQ(f.to_vector(), (std::vector<double>{1.25, 1.25, 1.25}));
}

TEST(Network, ParameterLengthChecked) {
  EXPECT_THROW(forward(NetworkSpec::linear(2), Tensor::vector({1.0}), Tensor::zeros({1, 2})), ShapeError);
}

TEST(Likelihood, GaussianMatchesDensity) {
  const auto ll = log_likelihood(LikelihoodSpec::gaussian(0.7), Tensor({2, 1}, {0.3, -1.0}), Tensor({2, 1}, {1.0, 2.0}));
  EXPECT_NEAR(ll[0], gauss_logpdf(1.0, 0.3, 0.7), 1e-14);
  EXPECT_NEAR(ll[1], gauss_logpdf(2.0, -1.0, 0.7), 1e-14);
}

TEST(Likelihood, LogisticBothLabels) {
  const auto lik = LikelihoodSpec::logistic();
  const auto ll = log_likelihood(lik, Tensor({2, 1}, {2.0, 2.0}), Tensor({2, 1}, {1.0, 0.0}));
  EXPECT_NEAR(ll[0], -std::log1p(std::exp(-2.0)), 1e-14);
  EXPECT_NEAR(ll[1], -std::log1p(std::exp(2.0)), 1e-14);
  EXPECT_THROW(log_likelihood(lik, Tensor({1, 1}, {0.0}), Tensor({1, 1}, {0.5})), ConfigError);
}

TEST(Likelihood, RobustLogisticFloorsProbabilities) {
  const auto lik = LikelihoodSpec::robust_logistic(0.05);
  const auto ll = log_likelihood(lik, Tensor({1, 1}, {-40.0}), Tensor({1, 1}, {1.0}));
  EXPECT_NEAR(ll[0], std::log(0.05), 1e-12);
  EXPECT_THROW(LikelihoodSpec::robust_logistic(0.5), ConfigError);
}

TEST(Likelihood, StudentTMatchesDensity) {
  const double nu = 4.0, s = 0.5, r = 1.3;
  const double want = std::lgamma(2.5) - std::lgamma(2.0) - 0.5 * std::log(nu * kPi * s * s) -
                      2.5 * std::log(1.0 + r * r / (nu * s * s));
  const auto ll = log_likelihood(LikelihoodSpec::student_t(nu, s), Tensor({1, 1}, {0.0}), Tensor({1, 1}, {r}));
  EXPECT_NEAR(ll[0], want, 1e-13);
  EXPECT_THROW(LikelihoodSpec::student_t(2.0), ConfigError);
}

TEST(PowerIntegral, GaussianClosedForm) {
  // (1 + b)^(-1/2) (2 pi s^2)^(-b/2)
  for (double s : {0.3, 1.0, 3.0}) {
    for (double b : {0.1, 0.5}) {
      const double want = std::pow(1.0 + b, -0.5) * std::pow(2.0 * kPi * s * s, -0.5 * b);
      EXPECT_NEAR(power_integral(LikelihoodSpec::gaussian(s), Tensor({1, 1}, {4.0}), 1.0 + b)[0], want, 1e-14);
    }
  }
  // Frozen: s = 1, b = 0.1.
  EXPECT_NEAR(power_integral(LikelihoodSpec::gaussian(1.0), Tensor({1, 1}, {0.0}), 1.1)[0], 0.8697504537725731, 1e-15);
}

TEST(PowerIntegral, LogisticSumsLabels) {
  const double f = 0.8, e = 1.3;
  const double p = 1.0 / (1.0 + std::exp(-f));
  const double want = std::pow(p, e) + std::pow(1.0 - p, e);
  EXPECT_NEAR(power_integral(LikelihoodSpec::logistic(), Tensor({1, 1}, {f}), e)[0], want, 1e-14);
  EXPECT_NEAR(power_integral(LikelihoodSpec::logistic(), Tensor({1, 1}, {f}), 1.0)[0], 1.0, 1e-15);
}

TEST(PowerIntegral, GammaNormalizerAndStudentT) {
  const auto lik = LikelihoodSpec::gaussian(1.0);
  const Tensor f({1, 1}, {0.0});
  EXPECT_NEAR(gamma_normalizer(lik, f, 0.1)[0], std::pow(0.8697504537725731, 0.1 / 1.1), 1e-14);
  EXPECT_EQ(gamma_normalizer(lik, f, 0.0)[0], 1.0);
  EXPECT_THROW(power_integral(LikelihoodSpec::student_t(3.0), f, 1.5), UnsupportedError);
}

TEST(PowerIntegral, PowerDensityIsExpOfScaledLogLik) {
  const auto lik = LikelihoodSpec::gaussian(1.0);
  const Tensor f({1, 1}, {0.0}), y({1, 1}, {1.0});
  EXPECT_NEAR(power_density(lik, f, y, 0.3)[0], std::exp(0.3 * gauss_logpdf(1.0, 0.0, 1.0)), 1e-15);
}

// Cross-entropies evaluated with a point-mass theta on a linear model.
class CrossEntropyTest : public ::testing::Test {
 protected:
  NetworkSpec net = NetworkSpec::linear(1);
  Tensor theta = Tensor::vector({1.0, 0.0});
  Batch batch{Tensor({3, 1}, {0.0, 1.0, 2.0}), Tensor({3, 1}, {0.5, 1.0, 7.0})};
  LikelihoodSpec lik = LikelihoodSpec::gaussian(1.0);
  std::vector<double> f{0.0, 1.0, 2.0}, y{0.5, 1.0, 7.0};
};

TEST_F(CrossEntropyTest, KlIsMeanNegativeLogLik) {
  double want = 0.0;
  for (int i = 0; i < 3; ++i) want -= gauss_logpdf(y[i], f[i], 1.0) / 3.0;
  EXPECT_NEAR(cross_entropy(DivergenceConfig::kl(3), lik, net, theta, batch).item(), want, 1e-14);
  EXPECT_NEAR(cross_entropy_kl(lik, net, theta, batch).item(), want, 1e-14);
}

TEST_F(CrossEntropyTest, BetaMatchesDefinition) {
  const double b = 0.2;
  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    want += (-(1.0 + b) / b * std::exp(b * gauss_logpdf(y[i], f[i], 1.0)) +
             std::pow(1.0 + b, -0.5) * std::pow(2.0 * kPi, -0.5 * b)) / 3.0;
  }
  EXPECT_NEAR(cross_entropy_beta(lik, net, theta, batch, b).item(), want, 1e-13);
}

TEST_F(CrossEntropyTest, GammaVariantsMatchDefinitions) {
  const double g = 0.3;
  const double norm = std::pow(std::pow(1.0 + g, -0.5) * std::pow(2.0 * kPi, -0.5 * g), g / (1.0 + g));
  double transformed = 0.0, mean_pow = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double pg = std::exp(g * gauss_logpdf(y[i], f[i], 1.0));
    transformed += -(1.0 + g) / g * pg / norm / 3.0;
    mean_pow += pg / 3.0;
  }
  EXPECT_NEAR(cross_entropy_gamma_transformed(lik, net, theta, batch, g).item(), transformed, 1e-13);
  const double original = -std::log(mean_pow) / g + std::log(norm) / g;
  EXPECT_NEAR(cross_entropy_gamma_original(lik, net, theta, batch, g, 3).item(), original, 1e-13);
  EXPECT_THROW(cross_entropy_gamma_original(lik, net, theta, batch, g, 10), ConfigError);
}

TEST_F(CrossEntropyTest, RobustTermsDownweightTheOutlier) {
  // The third point has residual 5; its share of the beta gradient is tiny.
  auto grad_of = [&](const DivergenceConfig& d, const Batch& b) {
    Tape t;
    const Tensor v = t.variable(theta);
    return t.gradient(cross_entropy(d, lik, net, v, b), std::vector<Tensor>{v})[0].to_vector();
  };
  const Batch clean{Tensor({2, 1}, {0.0, 1.0}), Tensor({2, 1}, {0.5, 1.0})};
  const auto beta_all = grad_of(DivergenceConfig::beta(0.5, 3), batch);
  const auto beta_clean = grad_of(DivergenceConfig::beta(0.5, 2), clean);
  const auto kl_all = grad_of(DivergenceConfig::kl(3), batch);
  const auto kl_clean = grad_of(DivergenceConfig::kl(2), clean);
  // Compare sums over points (means times counts).
  const double beta_shift = std::abs(3.0 * beta_all[0] - 2.0 * beta_clean[0]);
  const double kl_shift = std::abs(3.0 * kl_all[0] - 2.0 * kl_clean[0]);
  EXPECT_LT(beta_shift, 1e-2 * kl_shift);
}

TEST_F(CrossEntropyTest, UniformWeightsReproduceMeans) {
  const Tensor w = Tensor::full({3}, 1.0 / 3.0);
  for (auto d : {DivergenceConfig::kl(3), DivergenceConfig::beta(0.3, 3), DivergenceConfig::gamma_transformed(0.3, 3),
                 DivergenceConfig::gamma_original(0.3, 3)}) {
    EXPECT_NEAR(weighted_cross_entropy(d, lik, net, theta, batch, w).item(),
                cross_entropy(d, lik, net, theta, batch).item(), 1e-13)
        << d.label();
  }
}

TEST_F(CrossEntropyTest, PowersApproachKlGradient) {
  auto grad_of = [&](const DivergenceConfig& d) {
    Tape t;
    const Tensor v = t.variable(theta);
    return t.gradient(cross_entropy(d, lik, net, v, batch), std::vector<Tensor>{v})[0].to_vector();
  };
  const auto kl = grad_of(DivergenceConfig::kl(3));
  double prev = 1e300;
  for (double p : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double err = rvi::testing::rel_error(grad_of(DivergenceConfig::beta(p, 3)), kl);
    EXPECT_LT(err, 0.5 * prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Divergence, ConfigValidation) {
  EXPECT_THROW(DivergenceConfig::beta(0.0, 1), ConfigError);
  EXPECT_THROW(DivergenceConfig::beta(1.5, 1), ConfigError);
  EXPECT_THROW(DivergenceConfig::gamma_transformed(-0.1, 1), ConfigError);
  EXPECT_THROW(parse_divergence("renyi"), ConfigError);
  EXPECT_EQ(DivergenceConfig::beta(0.1, 5).label(), "beta=0.1");
  EXPECT_EQ(DivergenceConfig::kl(5).weight(), 5.0);
  auto d = DivergenceConfig::kl(5);
  d.data_weight = 2.0;
  EXPECT_EQ(d.weight(), 2.0);
}

TEST(Variational, KlToPriorClosedForm) {
  const MeanFieldGaussian q{{0.5, -1.0}, {std::log(0.5), 0.0}};
  const PriorSpec p{{0.0, 0.0}, {1.0, 2.0}};
  double want = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double s = std::exp(q.raw_scales[i]);
    want += std::log(p.std[i] / s) + (s * s + q.means[i] * q.means[i]) / (2.0 * p.std[i] * p.std[i]) - 0.5;
  }
  EXPECT_NEAR(kl_q_prior(q, p), want, 1e-14);
  EXPECT_NEAR(kl_q_prior(MeanFieldGaussian{{0.0}, {0.0}}, PriorSpec::standard(1)), 0.0, 1e-15);
}

TEST(Variational, SampleThetaReparameterizes) {
  const auto th = sample_theta(Tensor::vector({1.0, 2.0}), Tensor::vector({0.0, std::log(3.0)}), Tensor::vector({0.5, -1.0}));
  EXPECT_NEAR(th[0], 1.5, 1e-15);
  EXPECT_NEAR(th[1], -1.0, 1e-14);
}

TEST(Variational, StandardNormalMoments) {
  Rng rng(2);
  const auto v = standard_normal(20000, 1, rng);
  double m = 0.0, s = 0.0;
  for (double x : v) m += x / v.size();
  for (double x : v) s += (x - m) * (x - m) / v.size();
  EXPECT_NEAR(m, 0.0, 0.03);
  EXPECT_NEAR(s, 1.0, 0.03);
}
