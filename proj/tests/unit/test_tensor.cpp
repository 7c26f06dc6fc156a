#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fd_check.hpp"
#include "rvi/tensor.hpp"

using namespace rvi;
using rvi::testing::RandomGraph;
using rvi::testing::rel_error;

TEST(Tensor, ShapeMustMatchValues) {
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(Tensor, RejectsNonFinite) {
  EXPECT_THROW(Tensor::vector({1.0, NAN}), NumericError);
  EXPECT_THROW(exp(Tensor::scalar(1000.0)), NumericError);
}

TEST(Tensor, ReluClampsNegatives) {
  const auto r = relu(Tensor::vector({-1.0, 0.0, 2.0}));
  EXPECT_EQ(r.to_vector(), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Tensor, TanhOfZero) { EXPECT_EQ(tanh(Tensor::scalar(0.0)).item(), 0.0); }

TEST(Tensor, MatmulOfOnes) {
  const auto r = matmul(Tensor::full({2, 3}, 1.0), Tensor::full({3, 1}, 1.0));
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_EQ(r.to_vector(), (std::vector<double>{3.0, 3.0}));
}

TEST(Tensor, MatmulInnerDimMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 1})), ShapeError);
}

TEST(Tensor, BroadcastLeadingOnes) {
  const auto a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ((a + Tensor::vector({10, 20})).to_vector(), (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ((a * Tensor({1, 2}, {2, 3})).to_vector(), (std::vector<double>{2, 6, 6, 12}));
  EXPECT_EQ((a + 1.0).to_vector(), (std::vector<double>{2, 3, 4, 5}));
  EXPECT_THROW(a + Tensor::vector({1, 2, 3}), ShapeError);
  EXPECT_THROW(a + Tensor({2, 1}, {1, 2}), ShapeError);
}

TEST(Tensor, DomainErrors) {
  EXPECT_THROW(log(Tensor::scalar(0.0)), NumericError);
  EXPECT_THROW(log(Tensor::scalar(-1.0)), NumericError);
  EXPECT_THROW(pow(Tensor::scalar(-2.0), 0.5), NumericError);
  EXPECT_THROW(pow(Tensor::scalar(0.0), -1.0), NumericError);
  EXPECT_DOUBLE_EQ(pow(Tensor::scalar(-2.0), 2.0).item(), 4.0);
  EXPECT_THROW(Tensor::scalar(1.0) / Tensor::scalar(0.0), NumericError);
}

TEST(Tensor, SoftplusIsStable) {
  EXPECT_DOUBLE_EQ(softplus(Tensor::scalar(800.0)).item(), 800.0);
  EXPECT_NEAR(softplus(Tensor::scalar(-800.0)).item(), 0.0, 1e-300);
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(-800.0)).item(), 0.0);
}

TEST(Gradient, SquareAtThree) {
  Tape tape;
  const auto x = tape.variable(Tensor::scalar(3.0));
  const auto g = tape.gradient(x * x, std::vector<Tensor>{x});
  EXPECT_DOUBLE_EQ(g[0].item(), 6.0);
}

TEST(Gradient, TanhAtZero) {
  Tape tape;
  const auto x = tape.variable(Tensor::scalar(0.0));
  EXPECT_DOUBLE_EQ(tape.gradient(tanh(x), std::vector<Tensor>{x})[0].item(), 1.0);
}

TEST(Gradient, ReluKinkIsZero) {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({-1.0, 0.0, 2.0}));
  const auto g = tape.gradient(sum(relu(x)), std::vector<Tensor>{x});
  EXPECT_EQ(g[0].to_vector(), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Gradient, UnreachedLeafGetsZeros) {
  Tape tape;
  const auto x = tape.variable(Tensor::scalar(2.0));
  const auto y = tape.variable(Tensor::vector({1.0, 2.0}));
  const auto g = tape.gradient(x * x, std::vector<Tensor>{x, y});
  EXPECT_EQ(g[1].to_vector(), (std::vector<double>{0.0, 0.0}));
}

TEST(Gradient, OutputMustBeOnTapeAndScalar) {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.gradient(Tensor::scalar(1.0), std::vector<Tensor>{x}), std::invalid_argument);
  EXPECT_THROW(tape.gradient(x * 2.0, std::vector<Tensor>{x}), ShapeError);
}

TEST(Gradient, ReluNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  auto randn = [&](Shape s) {
    std::vector<double> v(shape_size(s));
    for (auto& x : v) x = n01(rng);
    return Tensor(s, v);
  };
  const Tensor xin = randn({5, 4});
  const Tensor y = randn({5, 1});
  const std::vector<Tensor> params{randn({4, 6}), randn({6}), randn({6, 6}), randn({6}),
                                   randn({6, 1}), randn({1})};
  rvi::testing::ScalarFn loss = [&](const std::vector<Tensor>& p) {
    Tensor h = relu(matmul(xin, p[0]) + p[1]);
    h = relu(matmul(h, p[2]) + p[3]);
    const Tensor out = matmul(h, p[4]) + p[5];
    return mean(square(out - y));
  };
  const auto g = rvi::testing::tape_gradient(loss, params);
  const auto fd = rvi::testing::fd_gradient(loss, params, 1e-5);
  EXPECT_LT(rel_error(g, fd), 1e-5);
}

TEST(Hvp, IdentityHessian) {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({0.3, -1.0, 2.0}));
  const Tensor f = 0.5 * sum(x * x);
  const auto v = Tensor::vector({1.5, -2.0, 0.25});
  const auto hv = hessian_vector_product(f, std::vector<Tensor>{x}, std::vector<Tensor>{v});
  EXPECT_EQ(hv[0].to_vector(), v.to_vector());
}

TEST(Hvp, DiagonalQuadratic) {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({0.7, 0.1, -0.4}));
  const auto a = Tensor::vector({1.0, 2.0, 3.0});
  const Tensor f = 0.5 * sum(a * x * x);
  const auto hv = hessian_vector_product(f, std::vector<Tensor>{x},
                                         std::vector<Tensor>{Tensor::vector({1.0, 1.0, 1.0})});
  EXPECT_EQ(hv[0].to_vector(), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(Hvp, ShapeMismatch) {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(hessian_vector_product(sum(x * x), std::vector<Tensor>{x},
                                      std::vector<Tensor>{Tensor::vector({1.0})}),
               ShapeError);
}

TEST(Hvp, RandomNetworkMatchesGradientDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  auto randn = [&](Shape s) {
    std::vector<double> v(shape_size(s));
    for (auto& x : v) x = n01(rng);
    return Tensor(s, v);
  };
  const Tensor xin = randn({6, 3});
  const std::vector<Tensor> params{randn({3, 5}), randn({5}), randn({5, 1})};
  rvi::testing::ScalarFn loss = [&](const std::vector<Tensor>& p) {
    const Tensor h = tanh(matmul(xin, p[0]) + p[1]);
    return sum(softplus(matmul(h, p[2])));
  };
  std::vector<double> v(3 * 5 + 5 + 5);
  for (auto& e : v) e = n01(rng);
  const auto hv = rvi::testing::tape_hvp(loss, params, v);
  const auto fd = rvi::testing::fd_hvp(loss, params, v, 1e-5);
  EXPECT_LT(rel_error(hv, fd), 1e-4);
}

class RandomGraphTest : public ::testing::TestWithParam<unsigned> {};

TEST_P(RandomGraphTest, GradientMatchesFiniteDifferences) {
  const RandomGraph graph{GetParam()};
  const auto inputs = RandomGraph::random_inputs(GetParam());
  const auto g = rvi::testing::tape_gradient(graph, inputs);
  const auto fd = rvi::testing::fd_gradient(graph, inputs, 1e-5);
  EXPECT_LT(rel_error(g, fd), 1e-5);
}

TEST_P(RandomGraphTest, HvpMatchesGradientDifferences) {
  const RandomGraph graph{GetParam()};
  const auto inputs = RandomGraph::random_inputs(GetParam());
  std::mt19937_64 rng(GetParam() + 100);
  std::normal_distribution<double> n01;
  std::vector<double> v(12);
  for (auto& e : v) e = n01(rng);
  const auto hv = rvi::testing::tape_hvp(graph, inputs, v);
  const auto fd = rvi::testing::fd_hvp(graph, inputs, v, 1e-5);
  EXPECT_LT(rel_error(hv, fd), 1e-4);
}

TEST_P(RandomGraphTest, HvpIsLinearInV) {
  const RandomGraph graph{GetParam()};
  const auto inputs = RandomGraph::random_inputs(GetParam());
  std::mt19937_64 rng(GetParam() + 200);
  std::normal_distribution<double> n01;
  std::vector<double> v1(12), v2(12), combo(12);
  const double alpha = 1.7;
  for (std::size_t i = 0; i < 12; ++i) {
    v1[i] = n01(rng);
    v2[i] = n01(rng);
    combo[i] = alpha * v1[i] + v2[i];
  }
  const auto h1 = rvi::testing::tape_hvp(graph, inputs, v1);
  const auto h2 = rvi::testing::tape_hvp(graph, inputs, v2);
  const auto hc = rvi::testing::tape_hvp(graph, inputs, combo);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(hc[i], alpha * h1[i] + h2[i], 1e-10);
}

TEST_P(RandomGraphTest, DeterministicAndReplayable) {
  const RandomGraph graph{GetParam()};
  const auto inputs = RandomGraph::random_inputs(GetParam());
  Tape t1, t2;
  std::vector<Tensor> v1{t1.variable(inputs[0]), t1.variable(inputs[1])};
  std::vector<Tensor> v2{t2.variable(inputs[0]), t2.variable(inputs[1])};
  const Tensor o1 = graph(v1);
  const Tensor o2 = graph(v2);
  EXPECT_EQ(o1.item(), o2.item());
  EXPECT_EQ(rvi::testing::flatten(t1.gradient(o1, v1)), rvi::testing::flatten(t2.gradient(o2, v2)));

  Tape t3;
  std::vector<Tensor> v3{t3.variable(inputs[0]), t3.variable(inputs[1])};
  const Tensor o3 = graph(v3);
  const auto replayed = t3.replay();
  EXPECT_EQ(replayed[static_cast<std::size_t>(o3.node())], o3.to_vector());
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomGraphTest, ::testing::Range(0u, 12u));
