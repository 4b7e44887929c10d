#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace cdpinn;

namespace {

TrainingSet small_set(const Problem& pb, std::uint64_t seed, bool with_data = true) {
  SamplingConfig s = default_sampling(pb);
  s.n_labeled = with_data ? 6 : 0;
  s.n_residual = 9;
  s.n_boundary = pb.faces().empty() ? 0 : 4;
  s.n_initial = pb.layout().has_time ? 5 : 0;
  s.seed = seed;
  TrainingSet ts = make_training_set(pb, s);
  if (!with_data) ts.labeled = {};
  return ts;
}

NetworkWeights net_for(const Problem& pb, std::uint64_t seed, std::vector<int> widths = {8, 6}) {
  auto net = testutil::random_net(pb.layout().input_dim(), pb.dim_u(), std::move(widths), seed);
  net.normalize_to_box(pb.input_lo(), pb.input_hi());
  return net;
}

}  // namespace

TEST(Losses, GradientMatchesFiniteDifferences) {
  for (const char* name : {"diffusion1d", "poisson2d", "wave2d", "fk-continuous"}) {
    auto pb = make_problem(name);
    const bool data = std::string(name) != "poisson2d" && std::string(name) != "fk-continuous";
    const TrainingSet ts = small_set(*pb, 3, data);
    NetworkWeights net = net_for(*pb, 7);
    const LossWeights w{data ? 0.7 : 0.0, 1.3, 0.4};
    const auto r = total_loss(net, *pb, ts, w);
    for (Eigen::Index i = 0; i < net.param_count(); i += 3) {
      NetworkWeights a = net, b = net;
      const double h = 1e-6;
      a.params()[i] += h;
      b.params()[i] -= h;
      const double fd =
          (total_loss(a, *pb, ts, w, {false}).breakdown.total - total_loss(b, *pb, ts, w, {false}).breakdown.total) /
          (2 * h);
      EXPECT_LT(testutil::rel_err(r.grad[i], fd, 1e-2), 1e-5) << name << " param " << i;
    }
  }
}

TEST(Losses, BreakdownIdentity) {
  auto pb = make_problem("diffusion1d");
  const TrainingSet ts = small_set(*pb, 1);
  const LossWeights w{2.0, 0.5, 3.0};
  const auto b = total_loss(net_for(*pb, 2), *pb, ts, w).breakdown;
  EXPECT_DOUBLE_EQ(b.total, 2.0 * b.data + 0.5 * b.res + 3.0 * b.cd);
  EXPECT_DOUBLE_EQ(b.res, b.res_interior + b.res_boundary + b.res_initial);
  EXPECT_DOUBLE_EQ(b.cd, b.cd_interior + b.cd_boundary + b.cd_initial);
  EXPECT_GT(b.res_boundary, 0.0);
  EXPECT_GT(b.res_initial, 0.0);
  EXPECT_GT(b.cd, 0.0);
}

TEST(Losses, ZeroWeightsGiveZeroObjective) {
  auto pb = make_problem("burgers1d");
  TrainingSet ts = small_set(*pb, 1, false);
  const auto r = total_loss(net_for(*pb, 3), *pb, ts, {0.0, 0.0, 0.0});
  EXPECT_EQ(r.breakdown.total, 0.0);
  EXPECT_EQ(r.grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(r.breakdown.cd_evaluated);
  EXPECT_THROW(total_loss(net_for(*pb, 3), *pb, ts, {-1.0, 1.0, 0.0}), ConfigError);
}

TEST(Losses, UnweightedCdIsDiagnosticOnly) {
  auto pb = make_problem("diffusion1d");
  const TrainingSet ts = small_set(*pb, 4);
  auto net = net_for(*pb, 5);
  const auto plain = total_loss(net, *pb, ts, {1.0, 1.0, 0.0});
  const auto diag = total_loss(net, *pb, ts, {1.0, 1.0, 0.0}, {true, true});
  EXPECT_TRUE(diag.breakdown.cd_evaluated);
  EXPECT_GT(diag.breakdown.cd, 0.0);
  EXPECT_EQ(plain.breakdown.cd, 0.0);
  EXPECT_NEAR(diag.breakdown.total, plain.breakdown.total, 1e-14 * plain.breakdown.total);
  EXPECT_LT((diag.grad - plain.grad).cwiseAbs().maxCoeff(), 1e-12 * (1 + plain.grad.cwiseAbs().maxCoeff()));
}

TEST(Losses, ChunkingDoesNotChangeResult) {
  auto pb = make_problem("wave2d");
  const TrainingSet ts = small_set(*pb, 9);
  auto net = net_for(*pb, 1);
  const auto a = total_loss(net, *pb, ts, {1, 1, 1});
  LossOptions o;
  o.chunk = 2;
  const auto b = total_loss(net, *pb, ts, {1, 1, 1}, o);
  EXPECT_NEAR(a.breakdown.total, b.breakdown.total, 1e-13 * a.breakdown.total);
  EXPECT_LT((a.grad - b.grad).cwiseAbs().maxCoeff(), 1e-11 * a.grad.cwiseAbs().maxCoeff());
}

TEST(Losses, CdMatchesFiniteDifferenceOfResidualAlongEncoding) {
  auto pb = make_problem("burgers1d");
  auto net = net_for(*pb, 11, {10, 10});
  const Eigen::MatrixXd Z = sample_residual(*pb, 7, 2);
  TrainingSet ts;
  ts.residual = Z;
  ts.boundary.Z.resize(Z.rows(), 0);
  ts.initial.resize(Z.rows(), 0);
  const double cd = loss_cd(net, *pb, ts).value;
  const int c = pb->layout().c(0);
  double want = 0.0;
  for (int p = 0; p < Z.cols(); ++p) {
    testutil::Fn r = [&](const std::vector<double>& v) {
      Eigen::MatrixXd z = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
      const JetBatch J = jet_forward(net, z, interior_index_set(*pb, true)).first;
      return residual(*pb, J, z, 0).r;
    };
    const double d = testutil::fd_partial(r, testutil::as_vec(Z.col(p)), {c}, 1e-4);
    want += d * d;
  }
  want /= Z.cols();
  EXPECT_LT(testutil::rel_err(cd, want), 1e-6);
}

TEST(Losses, ExpandedDiffusionCdAgrees) {
  auto pb = std::dynamic_pointer_cast<const Diffusion1D>(make_problem("diffusion1d"));
  auto net = net_for(*pb, 13);
  const Eigen::MatrixXd Z = sample_residual(*pb, 50, 6);
  TrainingSet ts;
  ts.residual = Z;
  ts.boundary.Z.resize(Z.rows(), 0);
  ts.initial.resize(Z.rows(), 0);
  const double a = loss_cd(net, *pb, ts).value, b = loss_cd_interior_expanded(net, *pb, Z);
  EXPECT_NEAR(a, b, 1e-12 * b);
}

TEST(Losses, ExactSolutionHasZeroLoss) {
  for (const char* name : {"diffusion1d", "wave2d", "poisson2d", "diffreact-2d"}) {
    auto pb = make_problem(name);
    SamplingConfig s = default_sampling(*pb);
    s.n_residual = 500;
    const TrainingSet ts = make_training_set(*pb, s);
    const auto b = loss_breakdown(exact_jet_source(pb), *pb, ts);
    EXPECT_LT(b.data, 1e-20) << name;
    EXPECT_LT(b.res, 1e-12) << name;
    EXPECT_LT(b.cd, 1e-12) << name;
  }
}

TEST(Losses, ZeroNetworkOnPoissonHandValue) {
  // u = 0 at (x, y) = (0, pi/2), a = b = 1: r = 2, dr/da = 2, dr/db = 2
  auto pb = make_problem("poisson2d");
  ArchitectureConfig a;
  a.widths = {4};
  auto net = init_network(a, 4, 1);
  net.params().setZero();
  TrainingSet ts;
  ts.residual.resize(4, 1);
  ts.residual << 0.0, M_PI / 2, 1.0, 1.0;
  ts.boundary.Z.resize(4, 0);
  ts.initial.resize(4, 0);
  const auto b = total_loss(net, *pb, ts, {0.0, 1.0, 1.0}).breakdown;
  EXPECT_NEAR(b.res_interior, 4.0, 1e-12);
  EXPECT_NEAR(b.cd_interior, 8.0, 1e-12);
}

TEST(Losses, DataLossHandValue) {
  auto pb = make_problem("diffusion1d");
  ArchitectureConfig a;
  a.widths = {3};
  auto net = init_network(a, 4, 1);
  net.params().setZero();
  net.b_mut(1) << 0.5;
  LabeledSet d;
  d.Z = Eigen::MatrixXd::Zero(4, 3);
  d.U.resize(1, 3);
  d.U << 0.5, 1.5, -0.5;
  const auto v = loss_data(net, *pb, d);
  EXPECT_DOUBLE_EQ(v.value, (0.0 + 1.0 + 1.0) / 3.0);
  // only the output bias moves the prediction when hidden activations vanish
  EXPECT_DOUBLE_EQ(v.grad[v.grad.size() - 1], 2.0 * (0.0 - 1.0 + 1.0) / 3.0);
  EXPECT_THROW(loss_data(net, *pb, LabeledSet{}), ConfigError);
}
