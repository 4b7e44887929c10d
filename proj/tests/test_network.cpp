#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

using namespace cdpinn;

TEST(Network, ParameterCountDefaultArchitecture) {
  ArchitectureConfig a;  // 5 x 128 tanh
  auto net = init_network(a, 4, 1);
  EXPECT_EQ(net.param_count(), 4 * 128 + 128 + 4 * (128 * 128 + 128) + 128 + 1);
  EXPECT_EQ(net.param_count(), 66817);
  // same order of magnitude as the reported ~8e4
  EXPECT_GT(net.param_count(), 1e4);
  EXPECT_LT(net.param_count(), 1e5);
}

TEST(Network, SmallestNetwork) {
  ArchitectureConfig a;
  a.widths = {1};
  EXPECT_EQ(init_network(a, 1, 1).param_count(), 4);
}

TEST(Network, EmptyHiddenListRejected) {
  ArchitectureConfig a;
  a.widths = {};
  EXPECT_THROW(init_network(a, 2, 1), ConfigError);
  a.widths = {0};
  EXPECT_THROW(init_network(a, 2, 1), ConfigError);
}

TEST(Network, SeedDeterminism) {
  ArchitectureConfig a;
  a.widths = {8, 8};
  a.seed = 42;
  EXPECT_EQ(init_network(a, 3, 2), init_network(a, 3, 2));
  a.seed = 43;
  auto other = init_network(a, 3, 2);
  a.seed = 42;
  EXPECT_FALSE(init_network(a, 3, 2) == other);
}

TEST(Network, GlorotBoundsAndZeroBias) {
  ArchitectureConfig a;
  a.widths = {30, 20};
  auto net = init_network(a, 3, 1);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double lim = std::sqrt(6.0 / (net.layer_in(l) + net.layer_out(l)));
    EXPECT_LE(net.W(l).cwiseAbs().maxCoeff(), lim);
    EXPECT_EQ(net.b(l).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Network, ZeroWeightsGiveZeroOutput) {
  ArchitectureConfig a;
  a.widths = {5};
  auto net = init_network(a, 3, 2);
  net.params().setZero();
  const std::vector<double> z = {0.3, 0.1, -2.0};
  EXPECT_EQ(eval_point(net, z).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Network, HandComputedSingleUnit) {
  ArchitectureConfig a;
  a.widths = {1};
  auto net = init_network(a, 2, 1);
  // layer 0: W (1x2), b (1); layer 1: W (1x1), b (1)
  net.W_mut(0) << 0.5, -0.25;
  net.b_mut(0) << 0.1;
  net.W_mut(1) << 2.0;
  net.b_mut(1) << -0.3;
  const double t = 0.4, x = 1.2;
  const std::vector<double> z = {t, x};
  EXPECT_DOUBLE_EQ(eval_point(net, z)[0], 2.0 * std::tanh(0.5 * t - 0.25 * x + 0.1) - 0.3);
}

TEST(Network, EvalPointSplitOverload) {
  auto net = testutil::random_net(4, 1, {7}, 2);
  const double x[1] = {0.5}, c[2] = {1.0, -2.0};
  const std::vector<double> z = {0.2, 0.5, 1.0, -2.0};
  EXPECT_EQ(eval_point(net, 0.2, x, c)[0], eval_point(net, z)[0]);
}

TEST(Network, ContinuousInEncoding) {
  auto net = testutil::random_net(4, 1, {16, 16}, 9);
  const std::vector<double> z = {0.3, -0.2, 0.6, 0.1};
  auto set = make_index_set({2, 3}, {MultiIndex{2}, MultiIndex{3}});
  auto [jet, tape] = jet_forward(net, z, set);
  for (int k : {2, 3}) {
    auto zp = z, zm = z;
    const double h = 1e-5;
    zp[k] += h;
    zm[k] -= h;
    const double fd = (eval_point(net, zp)[0] - eval_point(net, zm)[0]) / (2 * h);
    EXPECT_LT(testutil::rel_err(jet[MultiIndex{k}], fd), 1e-6);
  }
}

class CheckpointTest : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "cdpinn_ckpt_test";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  auto net = testutil::random_net(4, 2, {9, 7}, 77);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(4, -3), hi = Eigen::VectorXd::Constant(4, 2);
  net.normalize_to_box(lo, hi);
  const auto p1 = (dir / "a.cdpn").string(), p2 = (dir / "b.cdpn").string();
  save_checkpoint(net, p1);
  auto back = load_checkpoint(p1);
  EXPECT_EQ(back, net);
  save_checkpoint(back, p2);
  EXPECT_EQ(io::read_file<CheckpointError>(p1), io::read_file<CheckpointError>(p2));
  const std::vector<double> z = {0.1, 0.2, -0.7, 1.5};
  EXPECT_EQ(eval_point(back, z), eval_point(net, z));
}

TEST_F(CheckpointTest, TruncatedOrCorruptRejected) {
  auto bytes = serialize_checkpoint(testutil::random_net(2, 1, {3}, 1));
  auto cut = bytes;
  cut.resize(cut.size() / 2);
  EXPECT_THROW(parse_checkpoint(cut), CheckpointError);
  auto flip = bytes;
  flip[20] ^= 0x40;
  EXPECT_THROW(parse_checkpoint(flip), CheckpointError);
  EXPECT_THROW(load_checkpoint((dir / "missing.cdpn").string()), CheckpointError);
}

TEST(Graph, SyntheticConnectome) {
  auto g = make_synthetic_connectome(83, 2024);
  EXPECT_EQ(g.nodes(), 83);
  EXPECT_TRUE(g.connected());
  const auto& A = g.adjacency();
  EXPECT_EQ((A - A.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(A.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(A.minCoeff(), 0.0);
  EXPECT_EQ(g.laplacian().rowwise().sum().cwiseAbs().maxCoeff(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.laplacian());
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  auto g2 = make_synthetic_connectome(83, 2024);
  EXPECT_EQ(g2.adjacency(), g.adjacency());
}
