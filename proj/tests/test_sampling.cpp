#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace cdpinn;

namespace {

void expect_inside(const Problem& pb, const Eigen::MatrixXd& Z) {
  const auto lo = pb.input_lo(), hi = pb.input_hi();
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      EXPECT_GE(Z(i, j), lo[i]);
      EXPECT_LE(Z(i, j), hi[i]);
    }
  }
}

}  // namespace

TEST(Sampling, ResidualPointsInsideBox) {
  auto pb = make_problem("poisson2d");
  auto Z = sample_residual(*pb, 1 << 11, 1);
  EXPECT_EQ(Z.cols(), 2048);
  EXPECT_EQ(Z.rows(), 4);
  expect_inside(*pb, Z);
  auto one = sample_residual(*pb, 1, 2, SamplingStrategy::kUniform);
  EXPECT_EQ(one.cols(), 1);
  expect_inside(*pb, one);
  EXPECT_THROW(sample_residual(*pb, 0, 1), ConfigError);
}

TEST(Sampling, LatinHypercubeStratifies) {
  auto pb = make_problem("diffusion1d");
  auto Z = sample_residual(*pb, 64, 9, SamplingStrategy::kLatinHypercube);
  const auto lo = pb->input_lo(), hi = pb->input_hi();
  for (int a = 0; a < Z.rows(); ++a) {
    std::set<int> bins;
    for (int j = 0; j < 64; ++j) {
      bins.insert(std::min(63, static_cast<int>((Z(a, j) - lo[a]) / (hi[a] - lo[a]) * 64)));
    }
    EXPECT_EQ(bins.size(), 64u) << "axis " << a;
  }
}

TEST(Sampling, Reproducible) {
  auto pb = make_problem("wave2d");
  EXPECT_EQ(sample_residual(*pb, 100, 5), sample_residual(*pb, 100, 5));
  EXPECT_NE(sample_residual(*pb, 100, 5), sample_residual(*pb, 100, 6));
  auto a = make_training_set(*pb, default_sampling(*pb));
  auto b = make_training_set(*pb, default_sampling(*pb));
  EXPECT_EQ(a.residual, b.residual);
  EXPECT_EQ(a.boundary.Z, b.boundary.Z);
  EXPECT_EQ(a.labeled.U, b.labeled.U);
}

TEST(Sampling, Coverage) {
  for (auto s : {SamplingStrategy::kUniform, SamplingStrategy::kLatinHypercube}) {
    auto pb = make_problem("diffreact-2d");
    auto Z = sample_residual(*pb, 10000, 4, s);
    const auto lo = pb->input_lo(), hi = pb->input_hi();
    for (int a = 0; a < Z.rows(); ++a) {
      EXPECT_GE(Z.row(a).maxCoeff() - Z.row(a).minCoeff(), 0.95 * (hi[a] - lo[a]));
    }
  }
}

TEST(Sampling, LabeledFromClosedForm) {
  auto pb = make_problem("diffusion1d");
  const std::vector<double> c = {1.0, -5.0};
  auto d = sample_labeled(*pb, 20, c, 3);
  ASSERT_EQ(d.size(), 20);
  for (int j = 0; j < 20; ++j) {
    EXPECT_EQ(d.Z(2, j), 1.0);
    EXPECT_EQ(d.Z(3, j), -5.0);
    const double x[1] = {d.Z(1, j)};
    EXPECT_EQ(d.U(0, j), pb->exact(d.Z(0, j), x, c));
  }
  auto w = make_problem("wave2d");
  auto dw = sample_labeled(*w, 20, w->defaults().labeled_c, 3);
  EXPECT_EQ(dw.Z(3, 0), 0.505);
  EXPECT_EQ(dw.Z(4, 0), 0.505);
  EXPECT_THROW(sample_labeled(*pb, 5, std::vector<double>{20.0, 0.0}, 1), ConfigError);
}

TEST(Sampling, LabeledFromSolverGrid) {
  auto pb = make_problem("burgers1d");
  const std::vector<double> nu = {0.05};
  EXPECT_THROW(sample_labeled(*pb, 20, nu, 1), DataError);
  const SolutionGrid g = burgers_newton_implicit(0.05, 200, 200);
  auto d = sample_labeled(*pb, 20, nu, 1, &g);
  ASSERT_EQ(d.size(), 20);
  for (int j = 0; j < 20; ++j) {
    bool found = false;
    for (size_t it = 0; it < g.t().size() && !found; ++it) {
      if (g.t()[it] != d.Z(0, j)) continue;
      for (size_t i = 0; i < g.x(0).size(); ++i) {
        if (g.x(0)[i] == d.Z(1, j)) {
          EXPECT_EQ(g(it, i), d.U(0, j));
          found = true;
        }
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(Sampling, BoundaryEqualSplitOverFaces) {
  auto pb = make_problem("poisson2d");
  auto [bs, Z0] = sample_boundary_initial(*pb, 8, 0, 1);
  EXPECT_EQ(Z0.cols(), 0);
  std::vector<int> count(4, 0);
  for (int j = 0; j < bs.size(); ++j) {
    const int f = bs.face[j];
    ++count[f];
    const auto& face = pb->faces()[f];
    EXPECT_EQ(bs.Z(face.axis, j), face.upper ? M_PI : 0.0);
  }
  EXPECT_EQ(count, (std::vector<int>{2, 2, 2, 2}));
  auto [b2, z2] = sample_boundary_initial(*pb, 10, 0, 1);
  std::vector<int> c2(4, 0);
  for (int f : b2.face) ++c2[f];
  EXPECT_EQ(c2, (std::vector<int>{3, 3, 2, 2}));
}

TEST(Sampling, InitialPointsAtStartTime) {
  auto pb = make_problem("diffusion1d");
  auto [bs, Z0] = sample_boundary_initial(*pb, 0, 50, 2);
  EXPECT_EQ(bs.size(), 0);
  ASSERT_EQ(Z0.cols(), 50);
  for (int j = 0; j < 50; ++j) EXPECT_EQ(Z0(0, j), 0.1);
  expect_inside(*pb, Z0);
}

TEST(Sampling, WaveBoundaryValueOnUpperXFace) {
  auto pb = make_problem("wave2d");
  auto [bs, Z0] = sample_boundary_initial(*pb, 40, 0, 3);
  for (int j = 0; j < bs.size(); ++j) {
    if (bs.face[j] != 1) continue;
    const double t = bs.Z(0, j), y = bs.Z(2, j), c = bs.Z(3, j), k = bs.Z(4, j);
    const double x[2] = {1.0, y}, cc[2] = {c, k};
    EXPECT_NEAR(pb->boundary_value(1, t, x, cc), 10 * std::sin(k) * std::sin(k * y) * std::cos(std::sqrt(2.0) * c * k * t),
                1e-13);
  }
}

TEST(Sampling, InvalidCounts) {
  EXPECT_THROW(sample_boundary_initial(*make_problem("fk-graph"), 4, 0, 1), ConfigError);
  EXPECT_THROW(sample_boundary_initial(*make_problem("poisson2d"), 0, 4, 1), ConfigError);
  EXPECT_THROW(sample_boundary_initial(*make_problem("poisson2d"), -1, 0, 1), ConfigError);
}
