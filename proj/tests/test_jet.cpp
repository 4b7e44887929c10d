#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace cdpinn;
using testutil::fd_partial;
using testutil::rel_err;

TEST(MultiIndex, DownwardClosure) {
  // u_xxc with tracked {x=0, c=1}: (), x, c, xx, xc, xxc
  auto set = make_index_set({0, 1}, {MultiIndex{0, 0, 1}});
  EXPECT_EQ(set->size(), 6);
  EXPECT_TRUE(set->contains(MultiIndex{0, 1}));
  EXPECT_FALSE(set->contains(MultiIndex{1, 1}));
  EXPECT_EQ(set->augment(set->require(MultiIndex{0, 0}), 1), set->require(MultiIndex{0, 0, 1}));
  EXPECT_EQ(set->augment(set->require(MultiIndex{0, 0, 1}), 1), -1);
}

TEST(MultiIndex, OrderAboveThreeRejected) {
  EXPECT_THROW(MultiIndex({0, 0, 1, 1}), UnsupportedOrderError);
  EXPECT_THROW(MultiIndex({0, 0, 1}).plus(1), UnsupportedOrderError);
  EXPECT_THROW(patterns_from({{0, 1, 2, 3}}), UnsupportedOrderError);
}

TEST(MultiIndex, UntrackedCoordinateRejected) {
  EXPECT_THROW(make_index_set({0}, {MultiIndex{1}}), ShapeError);
}

TEST(Jet, ArithmeticMatchesHandDerivatives) {
  // f(x, y) = sin(x) exp(y) + x^2 y / (1 + y)
  auto set = make_index_set({0, 1}, {MultiIndex{0, 0, 1}, MultiIndex{0, 1, 1}, MultiIndex{0, 0, 0}, MultiIndex{1, 1, 1}});
  const double x0 = 0.7, y0 = -0.4;
  Jet x = Jet::variable(set, 0, x0), y = Jet::variable(set, 1, y0);
  Jet f = sin(x) * exp(y) + x * x * y / (1.0 + y);
  const double s = std::sin(x0), c = std::cos(x0), e = std::exp(y0);
  const double q = y0 / (1 + y0), q1 = 1 / ((1 + y0) * (1 + y0)), q2 = -2 / std::pow(1 + y0, 3),
               q3 = 6 / std::pow(1 + y0, 4);
  EXPECT_NEAR((f[MultiIndex{}]), s * e + x0 * x0 * q, 1e-14);
  EXPECT_NEAR((f[MultiIndex{0}]), c * e + 2 * x0 * q, 1e-14);
  EXPECT_NEAR((f[MultiIndex{1}]), s * e + x0 * x0 * q1, 1e-14);
  EXPECT_NEAR((f[MultiIndex{0, 0}]), -s * e + 2 * q, 1e-14);
  EXPECT_NEAR((f[MultiIndex{0, 1}]), c * e + 2 * x0 * q1, 1e-14);
  EXPECT_NEAR((f[MultiIndex{1, 1}]), s * e + x0 * x0 * q2, 1e-13);
  EXPECT_NEAR((f[MultiIndex{0, 0, 0}]), -c * e, 1e-14);
  EXPECT_NEAR((f[MultiIndex{0, 0, 1}]), -s * e + 2 * q1, 1e-13);
  EXPECT_NEAR((f[MultiIndex{0, 1, 1}]), c * e + 2 * x0 * q2, 1e-13);
  EXPECT_NEAR((f[MultiIndex{1, 1, 1}]), s * e + x0 * x0 * q3, 1e-12);
}

TEST(Jet, ElementaryFunctionsAgainstFiniteDifferences) {
  auto set = make_index_set({0, 1}, {MultiIndex{0, 0, 1}, MultiIndex{1, 1, 1}});
  const std::vector<double> z0 = {0.3, 1.2};
  auto build = [&](const Jet& x, const Jet& y) { return log(y) * cos(x) + sqrt(y) * tanh(x * y) - pow(y, 1.5) / x; };
  Jet f = build(Jet::variable(set, 0, z0[0]), Jet::variable(set, 1, z0[1]));
  testutil::Fn fn = [&](const std::vector<double>& z) {
    return std::log(z[1]) * std::cos(z[0]) + std::sqrt(z[1]) * std::tanh(z[0] * z[1]) - std::pow(z[1], 1.5) / z[0];
  };
  for (int p = 1; p < set->size(); ++p) {
    const auto& mi = set->at(p);
    std::vector<int> coords(mi.begin(), mi.end());
    const double h = mi.order() == 3 ? 2e-2 : 1e-3;
    EXPECT_LT(rel_err(f.coeff(p), fd_partial(fn, z0, coords, h)), mi.order() == 3 ? 1e-4 : 1e-7) << mi.str();
  }
}

TEST(JetEngine, PrimalMatchesEvalPointExactly) {
  auto net = testutil::random_net(4, 2, {12, 9}, 11);
  const std::vector<double> z = {0.2, -0.5, 1.3, 0.05};
  auto set = make_index_set({0, 1, 2, 3}, {MultiIndex{0, 1, 2}, MultiIndex{3, 3, 3}});
  Eigen::MatrixXd Z = Eigen::Map<const Eigen::VectorXd>(z.data(), 4);
  auto [J, tape] = jet_forward(net, Z, set);
  const Eigen::VectorXd u = eval_point(net, z);
  EXPECT_EQ(J(0, 0, 0), u[0]);
  EXPECT_EQ(J(1, 0, 0), u[1]);
}

TEST(JetEngine, BatchMatchesFiniteDifferences) {
  for (int trial = 0; trial < 5; ++trial) {
    auto net = testutil::random_net(3, 1, {16, 16, 16}, 100 + trial,
                                    trial % 2 ? Activation::kSin : Activation::kTanh);
    auto set = make_index_set({0, 1, 2}, {MultiIndex{0, 1, 2}, MultiIndex{0, 0, 0}, MultiIndex{1, 1, 2}});
    Rng rng(trial);
    Eigen::MatrixXd Z(3, 4);
    for (int i = 0; i < Z.size(); ++i) Z.data()[i] = rng.uniform(-1, 1);
    auto [J, tape] = jet_forward(net, Z, set);
    for (int p = 0; p < 4; ++p) {
      const std::vector<double> z = testutil::as_vec(Z.col(p));
      testutil::Fn fn = [&](const std::vector<double>& v) { return eval_point(net, v)[0]; };
      for (int s = 1; s < set->size(); ++s) {
        const auto& mi = set->at(s);
        std::vector<int> coords(mi.begin(), mi.end());
        const double h = mi.order() == 3 ? 2e-2 : 1e-3;
        EXPECT_LT(rel_err(J(0, s, p), fd_partial(fn, z, coords, h)), mi.order() == 3 ? 1e-3 : 1e-5)
            << "trial " << trial << " point " << p << " index " << mi.str();
      }
    }
  }
}

TEST(JetEngine, InputNormalizationEntersChainRule) {
  auto net = testutil::random_net(2, 1, {8}, 5);
  Eigen::VectorXd lo(2), hi(2);
  lo << -10, 0;
  hi << 10, 0.5;
  net.normalize_to_box(lo, hi);
  auto set = make_index_set({0, 1}, {MultiIndex{0, 0, 1}});
  const std::vector<double> z = {3.0, 0.1};
  auto [jet, tape] = jet_forward(net, z, set);
  testutil::Fn fn = [&](const std::vector<double>& v) { return eval_point(net, v)[0]; };
  EXPECT_LT(rel_err(jet[MultiIndex{0, 0, 1}], fd_partial(fn, z, {0, 0, 1}, 1e-2)), 1e-4);
  EXPECT_LT(rel_err(jet[MultiIndex{1}], fd_partial(fn, z, {1}, 1e-4)), 1e-7);
}

TEST(JetEngine, BackpropOfCoefficientMatchesWeightFiniteDifferences) {
  auto net = testutil::random_net(2, 1, {6, 5}, 21);
  auto set = make_index_set({0, 1}, {MultiIndex{0, 0, 1}});
  Eigen::MatrixXd Z(2, 3);
  Z << 0.1, -0.4, 0.7, 0.3, 0.2, -0.6;
  // scalar = sum over points of u_xxc * u_x
  const int pxxc = set->require(MultiIndex{0, 0, 1}), px = set->require(MultiIndex{0});
  auto scalar = [&](const NetworkWeights& n) {
    JetBatch J = jet_forward(n, Z, set).first;
    double s = 0;
    for (int p = 0; p < 3; ++p) s += J(0, pxxc, p) * J(0, px, p);
    return s;
  };
  auto [J, tape] = jet_forward(net, Z, set);
  Seed seed{tape.id, Eigen::MatrixXd::Zero(1, J.coeffs.cols())};
  for (int p = 0; p < 3; ++p) {
    seed.adjoint(0, pxxc * 3 + p) = J(0, px, p);
    seed.adjoint(0, px * 3 + p) = J(0, pxxc, p);
  }
  const Eigen::VectorXd g = backprop_scalar(net, tape, seed);
  for (Eigen::Index i = 0; i < net.param_count(); ++i) {
    NetworkWeights a = net, b = net;
    const double h = 1e-5;
    a.params()[i] += h;
    b.params()[i] -= h;
    const double fd = (scalar(a) - scalar(b)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-7 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
}

TEST(JetEngine, SeedFromForeignTapeRejected) {
  auto net = testutil::random_net(2, 1, {4}, 1);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 1);
  auto [J1, t1] = jet_forward(net, Z, primal_index_set());
  auto [J2, t2] = jet_forward(net, Z, primal_index_set());
  Seed s{t2.id, Eigen::MatrixXd::Ones(1, 1)};
  EXPECT_THROW(backprop_scalar(net, t1, s), ProvenanceError);
}

TEST(JetEngine, DimensionMismatch) {
  auto net = testutil::random_net(3, 1, {4}, 1);
  const std::vector<double> z = {0.0, 1.0};
  EXPECT_THROW(eval_point(net, z), ShapeError);
}
