#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

using namespace cdpinn;

TEST(Adam, FirstTwoStepsByHand) {
  Eigen::VectorXd w(2);
  w << 1.0, -2.0;
  AdamState st(2);
  AdamConfig cfg;
  Eigen::VectorXd g(2);
  g << 0.5, -4.0;
  adam_step(w, g, st, cfg);
  // bias-corrected moments equal g and g^2 after one step
  EXPECT_NEAR(w[0], 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(w[1], -2.0 + 1e-3 * 4.0 / (4.0 + 1e-8), 1e-15);
  Eigen::VectorXd g2(2);
  g2 << 1.0, 0.0;
  const double w0 = w[0];
  adam_step(w, g2, st, cfg);
  const double m = (0.9 * 0.1 * 0.5 + 0.1 * 1.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 0.25 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(w[0], w0 - 1e-3 * m / (std::sqrt(v) + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 2);
}

TEST(Adam, RejectsBadInput) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  AdamState st(3);
  EXPECT_THROW(adam_step(w, Eigen::VectorXd::Zero(2), st, {}), ShapeError);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
  g[1] = NAN;
  EXPECT_THROW(adam_step(w, g, st, {}), DivergenceError);
}

TEST(Adam, MinimizesQuadratic) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(4, 3.0), target(4);
  target << 1, -1, 0.5, 2;
  AdamState st(4);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  for (int i = 0; i < 5000; ++i) adam_step(w, 2.0 * (w - target), st, cfg);
  EXPECT_LT((w - target).norm(), 1e-3);
}

TEST(Lbfgs, QuadraticConvergesInFewSteps) {
  const int n = 10;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) A(i, i) = 1.0 + i;
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1, 1);
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
  LbfgsConfig cfg;
  cfg.grad_tol = 1e-7;
  auto r = lbfgs_run(Eigen::VectorXd::Zero(n), f, cfg);
  EXPECT_EQ(r.status, LbfgsStatus::kConverged);
  EXPECT_LE(r.steps, 2 * n);
  EXPECT_LT((r.x - A.ldlt().solve(b)).norm(), 1e-7);
}

TEST(Lbfgs, Rosenbrock) {
  Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g << -2 * a - 400 * x[0] * b, 200 * b;
    return a * a + 100 * b * b;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  auto r = lbfgs_run(x0, f, {});
  EXPECT_EQ(r.status, LbfgsStatus::kConverged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
  for (size_t i = 1; i < r.trace.size(); ++i) EXPECT_LT(r.trace[i], r.trace[i - 1]);
}

TEST(Lbfgs, OptimalStartTakesNoSteps) {
  Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 2 * x;
    return x.squaredNorm();
  };
  auto r = lbfgs_run(Eigen::VectorXd::Zero(3), f, {});
  EXPECT_EQ(r.steps, 0);
  EXPECT_EQ(r.status, LbfgsStatus::kConverged);
  EXPECT_EQ(r.evaluations, 1);
}

TEST(Lbfgs, ConfigValidation) {
  LbfgsConfig c;
  c.c1 = 0.95;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.history = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

namespace {

struct Fixture {
  ProblemPtr pb = make_problem("diffusion1d");
  TrainingSet ts;
  ArchitectureConfig arch;
  Fixture() {
    SamplingConfig s = default_sampling(*pb);
    s.n_residual = 64;
    s.n_boundary = 16;
    s.n_initial = 16;
    ts = make_training_set(*pb, s);
    arch.widths = {12, 12};
  }
};

}  // namespace

TEST(Train, ZeroStepsKeepsInitialWeights) {
  Fixture f;
  TrainConfig cfg;
  cfg.adam_steps = 0;
  cfg.lbfgs_steps = 0;
  auto r = train(*f.pb, f.ts, {1, 1, 1}, f.arch, cfg);
  EXPECT_EQ(r.net, make_network(*f.pb, f.arch));
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].epoch, 0);
  EXPECT_FALSE(r.diverged);
}

TEST(Train, DeterministicAndDecreasing) {
  Fixture f;
  TrainConfig cfg;
  cfg.adam_steps = 60;
  cfg.lbfgs_steps = 20;
  cfg.log_interval = 20;
  auto a = train(*f.pb, f.ts, {1, 1, 0}, f.arch, cfg);
  auto b = train(*f.pb, f.ts, {1, 1, 0}, f.arch, cfg);
  EXPECT_EQ(a.net, b.net);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss.total, b.log[i].loss.total);
  EXPECT_LT(a.log.back().loss.total, 0.5 * a.log.front().loss.total);
  EXPECT_EQ(a.log.front().epoch, 0);
  EXPECT_EQ(a.log.back().epoch, 60 + a.lbfgs_steps);
  // cd recorded as a diagnostic even though unweighted
  EXPECT_TRUE(a.log.front().loss.cd_evaluated);
  EXPECT_GT(a.log.front().loss.cd, 0.0);
}

TEST(Train, NonFiniteDataReportsDivergence) {
  Fixture f;
  f.ts.labeled.U(0, 0) = NAN;
  TrainConfig cfg;
  cfg.adam_steps = 5;
  cfg.lbfgs_steps = 0;
  auto r = train(*f.pb, f.ts, {1, 1, 0}, f.arch, cfg);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.message.empty());
  EXPECT_TRUE(r.net.params().allFinite());
}

TEST(Train, EpochSplitAndValidation) {
  auto c = TrainConfig::with_epochs(1000);
  EXPECT_EQ(c.adam_steps, 800);
  EXPECT_EQ(c.lbfgs_steps, 200);
  c.log_interval = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, LogCsvRoundTripsDoubles) {
  TrainRecord r;
  r.epoch = 3;
  r.loss.total = 0.1 + 0.2;
  r.loss.data = 1.0 / 3.0;
  r.loss.cd_evaluated = false;
  r.test_mse = 2e-7 / 3.0;
  std::ostringstream os;
  write_train_log({r}, os);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  std::getline(is, line);
  EXPECT_EQ(header, "epoch,total,data,res,cd,test_mse,seconds");
  std::vector<std::string> f;
  std::stringstream ls(line);
  for (std::string s; std::getline(ls, s, ',');) f.push_back(s);
  ASSERT_EQ(f.size(), 7u);
  EXPECT_EQ(std::stod(f[1]), 0.1 + 0.2);
  EXPECT_EQ(std::stod(f[2]), 1.0 / 3.0);
  EXPECT_EQ(f[4], "");
  EXPECT_EQ(std::stod(f[5]), 2e-7 / 3.0);
}
