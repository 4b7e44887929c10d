#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace cdpinn;

namespace {

/// u = tanh(2 D + 0.3 t - 0.4) + tanh(1.5 alpha + 0.5 x - 1.5): monotone in
/// each encoding component, so the misfit has a unique minimizer.
NetworkWeights identifiable_net() {
  ArchitectureConfig a;
  a.widths = {2};
  auto net = init_network(a, 4, 1);
  net.W_mut(0) << 0.3, 0.0, 2.0, 0.0, 0.0, 0.5, 0.0, 1.5;
  net.b_mut(0) << -0.4, -1.5;
  net.W_mut(1) << 1.0, 1.0;
  net.b_mut(1) << 0.0;
  return net;
}

ObservationSet observe(const NetworkWeights& net, const std::vector<double>& c, int n, double noise = 0.0,
                       std::uint64_t seed = 1) {
  Rng rng(seed);
  ObservationSet obs;
  obs.noise = noise;
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(0, 1), x = rng.uniform(0, 1);
    const std::vector<double> z = {t, x, c[0], c[1]};
    obs.add(t, x, eval_point(net, z)[0] * (1 + noise * rng.normal()));
  }
  return obs;
}

}  // namespace

TEST(Inverse, RecoversEncodingFromNoiselessObservations) {
  auto pb = make_problem("fk-continuous");
  const auto net = identifiable_net();
  const std::vector<double> truth = {0.15, 1.30}, init = {0.40, 0.70};
  const auto obs = observe(net, truth, 40);
  InverseConfig cfg;
  cfg.starts = 3;
  auto r = estimate(net, *pb, obs, init, pb->c_lo(), pb->c_hi(), cfg);
  EXPECT_NEAR(r.c[0], truth[0], 1e-4 * truth[0]);
  EXPECT_NEAR(r.c[1], truth[1], 1e-4 * truth[1]);
  EXPECT_LT(r.objective, 1e-10);
  for (size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
  EXPECT_EQ(r.starts[0].init, init);
}

TEST(Inverse, FrozenWeightsUntouched) {
  auto pb = make_problem("fk-continuous");
  const auto net = testutil::random_net(4, 1, {8}, 3);
  const auto copy = net;
  const auto obs = observe(net, {0.2, 1.0}, 10);
  estimate(net, *pb, obs, std::vector<double>{0.3, 0.9}, pb->c_lo(), pb->c_hi());
  EXPECT_EQ(net, copy);
}

TEST(Inverse, MisfitGradientMatchesFiniteDifferences) {
  auto pb = make_problem("fk-continuous");
  const auto net = testutil::random_net(4, 1, {10, 10}, 8);
  const auto obs = observe(net, {0.3, 0.8}, 15, 0.05);
  Misfit fn(net, *pb, obs);
  const std::vector<double> c = {0.12, 1.1};
  std::vector<double> g;
  fn(c, &g);
  testutil::Fn f = [&](const std::vector<double>& v) { return fn(v); };
  for (int k = 0; k < 2; ++k) EXPECT_LT(testutil::rel_err(g[k], testutil::fd_partial(f, c, {k}, 1e-4)), 1e-8);
}

TEST(Inverse, LandscapeAgreesWithMisfit) {
  auto pb = make_problem("fk-continuous");
  const auto net = identifiable_net();
  const auto obs = observe(net, {0.15, 1.30}, 30);
  const auto a0 = linspace(0.05, 0.5, 10), a1 = linspace(0.5, 1.5, 11);
  const auto L = loss_landscape(net, *pb, obs, a0, a1);
  Misfit fn(net, *pb, obs);
  const double c[2] = {a0[2], a1[8]};
  EXPECT_EQ(L(2, 8), fn(c));
  Eigen::Index i, j;
  L.minCoeff(&i, &j);
  EXPECT_EQ(i, 2);  // a0[2] = 0.15
  EXPECT_EQ(j, 8);  // a1[8] = 1.3
  EXPECT_THROW(loss_landscape(net, *pb, obs, {0.01}, a1), ConfigError);
  std::ostringstream os;
  write_landscape_csv(*pb, a0, a1, L, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "D,alpha,misfit");
}

TEST(Inverse, MultiStartDeterministic) {
  auto pb = make_problem("fk-continuous");
  const auto net = testutil::random_net(4, 1, {8}, 4);
  const auto obs = observe(net, {0.2, 1.2}, 12, 0.02);
  InverseConfig cfg;
  cfg.max_steps = 200;
  cfg.seed = 5;
  const std::vector<double> init = {0.3, 1.0};
  auto a = estimate(net, *pb, obs, init, pb->c_lo(), pb->c_hi(), cfg);
  auto b = estimate(net, *pb, obs, init, pb->c_lo(), pb->c_hi(), cfg);
  EXPECT_EQ(a.c, b.c);
  EXPECT_EQ(a.best_start, b.best_start);
  ASSERT_EQ(a.starts.size(), 5u);
  for (size_t s = 0; s < a.starts.size(); ++s) EXPECT_EQ(a.starts[s].init, b.starts[s].init);
  for (const auto& s : a.starts) EXPECT_GE(s.objective, a.objective);
}

TEST(Inverse, RejectsInvalidSetups) {
  auto pb = make_problem("fk-continuous");
  const auto net = identifiable_net();
  const auto obs = observe(net, {0.2, 1.0}, 5);
  EXPECT_THROW(estimate(net, *pb, obs, std::vector<double>{0.6, 1.0}, pb->c_lo(), pb->c_hi()), ConfigError);
  EXPECT_THROW(estimate(net, *pb, obs, std::vector<double>{0.2}, pb->c_lo(), pb->c_hi()), ShapeError);
  InverseConfig cfg;
  cfg.starts = 0;
  EXPECT_THROW(estimate(net, *pb, obs, std::vector<double>{0.2, 1.0}, pb->c_lo(), pb->c_hi(), cfg), ConfigError);
  ObservationSet late = obs;
  late.t[0] = 2.0;
  EXPECT_THROW(Misfit(net, *pb, late), DataError);
  EXPECT_THROW(Misfit(net, *pb, ObservationSet{}), DataError);
  auto poisson = make_problem("poisson2d");
  EXPECT_THROW(Misfit(testutil::random_net(4, 1, {3}, 1), *poisson, obs), UnsupportedError);
  auto graph = make_problem("fk-graph");
  ObservationSet node;
  node.add(0.5, 83, 0.1);
  EXPECT_THROW(validate_observations(*graph, node), DataError);
}

TEST(Inverse, GraphObservationsSelectComponent) {
  auto pb = make_problem("fk-graph");
  const auto net = testutil::random_net(3, 83, {6}, 2);
  ObservationSet obs;
  const std::vector<double> z = {0.4, 0.2, 1.1};
  const Eigen::VectorXd u = eval_point(net, z);
  obs.add(0.4, 17, u[17]);
  obs.add(0.4, 60, u[60]);
  Misfit fn(net, *pb, obs);
  const double c[2] = {0.2, 1.1};
  EXPECT_NEAR(fn(c), 0.0, 1e-28);
}

TEST(Observations, CsvRoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "cdpinn_obs_test";
  std::filesystem::create_directories(dir);
  ObservationSet obs;
  obs.add(0.1, 0.25, 1.0 / 3.0);
  obs.add(0.9, 0.75, -2e-9);
  {
    std::ofstream f(dir / "a.csv");
    write_observations(obs, f);
  }
  auto back = read_observations((dir / "a.csv").string());
  EXPECT_EQ(back.t, obs.t);
  EXPECT_EQ(back.pos, obs.pos);
  EXPECT_EQ(back.value, obs.value);
  {
    std::ofstream f(dir / "b.csv");
    f << "t,position,value\n0.1,0.2,0.3\n0.1,oops,0.3\n";
  }
  try {
    read_observations((dir / "b.csv").string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
  EXPECT_THROW(read_observations((dir / "none.csv").string()), DataError);
  std::filesystem::remove_all(dir);
}
