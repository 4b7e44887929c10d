#pragma once

// Point sets for training: labeled data, interior collocation points,
// boundary points (tagged with their face) and initial points. Every point
// is a column z = (t?, x..., c...) in the problem's input layout.

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/random.hpp"
#include "cdpinn/solution_grid.hpp"

namespace cdpinn {

enum class SamplingStrategy { kUniform, kLatinHypercube };

inline SamplingStrategy parse_strategy(const std::string& s) {
  if (s == "uniform" || s == "uniform-random") return SamplingStrategy::kUniform;
  if (s == "lhs" || s == "latin-hypercube") return SamplingStrategy::kLatinHypercube;
  throw ConfigError("unknown sampling strategy '" + s + "' (expected uniform or latin-hypercube)");
}

inline std::string strategy_name(SamplingStrategy s) {
  return s == SamplingStrategy::kUniform ? "uniform" : "latin-hypercube";
}

struct LabeledSet {
  Eigen::MatrixXd Z;  // input_dim x n
  Eigen::MatrixXd U;  // dim_u x n
  int size() const { return static_cast<int>(Z.cols()); }
};

struct BoundarySet {
  Eigen::MatrixXd Z;
  std::vector<int> face;
  int size() const { return static_cast<int>(Z.cols()); }
};

struct TrainingSet {
  LabeledSet labeled;
  Eigen::MatrixXd residual;
  BoundarySet boundary;
  Eigen::MatrixXd initial;

  int n_data() const { return labeled.size(); }
  int n_r() const { return static_cast<int>(residual.cols()); }
  int n_b() const { return boundary.size(); }
  int n_0() const { return static_cast<int>(initial.cols()); }
};

/// Independent stream seed derived from a base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

/// Fills `rows` of Z (one per entry of lo/hi) with n samples in the box.
inline void fill_box(Eigen::MatrixXd& Z, const std::vector<int>& rows, const std::vector<double>& lo,
                     const std::vector<double>& hi, Rng& rng, SamplingStrategy strategy) {
  const Eigen::Index n = Z.cols();
  std::vector<Eigen::Index> perm(n);
  for (size_t a = 0; a < rows.size(); ++a) {
    if (strategy == SamplingStrategy::kUniform) {
      for (Eigen::Index j = 0; j < n; ++j) Z(rows[a], j) = rng.uniform(lo[a], hi[a]);
      continue;
    }
    std::iota(perm.begin(), perm.end(), 0);
    for (Eigen::Index i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    const double w = (hi[a] - lo[a]) / static_cast<double>(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Z(rows[a], j) = std::min(hi[a], lo[a] + w * (static_cast<double>(perm[j]) + rng.uniform()));
    }
  }
}

inline void fill_encoding(const Problem& pb, Eigen::MatrixXd& Z, Rng& rng, SamplingStrategy s) {
  std::vector<int> rows;
  for (int k = 0; k < pb.layout().dim_c; ++k) rows.push_back(pb.layout().c(k));
  fill_box(Z, rows, pb.c_lo(), pb.c_hi(), rng, s);
}

inline void fill_space(const Problem& pb, Eigen::MatrixXd& Z, Rng& rng, SamplingStrategy s, int skip_axis = -1) {
  std::vector<int> rows;
  std::vector<double> lo, hi;
  for (int i = 0; i < pb.layout().dim_x; ++i) {
    if (i == skip_axis) continue;
    rows.push_back(pb.layout().x(i));
    lo.push_back(pb.x_lo()[i]);
    hi.push_back(pb.x_hi()[i]);
  }
  fill_box(Z, rows, lo, hi, rng, s);
}

inline void fill_time(const Problem& pb, Eigen::MatrixXd& Z, Rng& rng, SamplingStrategy s) {
  if (pb.layout().has_time) fill_box(Z, {pb.layout().t()}, {pb.t0()}, {pb.t1()}, rng, s);
}

}  // namespace detail

/// n interior collocation points over time x space x encoding range.
inline Eigen::MatrixXd sample_residual(const Problem& pb, int n, std::uint64_t seed,
                                       SamplingStrategy strategy = SamplingStrategy::kLatinHypercube) {
  if (n < 1) throw ConfigError("residual point count must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd Z(pb.layout().input_dim(), n);
  detail::fill_time(pb, Z, rng, strategy);
  detail::fill_space(pb, Z, rng, strategy);
  detail::fill_encoding(pb, Z, rng, strategy);
  return Z;
}

inline void check_encoding(const Problem& pb, std::span<const double> c) {
  if (static_cast<int>(c.size()) != pb.layout().dim_c) {
    throw ConfigError("encoding has " + std::to_string(c.size()) + " components, problem '" + pb.name() +
                      "' expects " + std::to_string(pb.layout().dim_c));
  }
  for (int k = 0; k < pb.layout().dim_c; ++k) {
    if (c[k] < pb.c_lo()[k] || c[k] > pb.c_hi()[k]) {
      throw ConfigError("encoding " + pb.c_names()[k] + " = " + std::to_string(c[k]) + " outside [" +
                        std::to_string(pb.c_lo()[k]) + ", " + std::to_string(pb.c_hi()[k]) + "]");
    }
  }
}

/// n labeled points at encoding `fixed_c`. Values come from the closed form
/// when the problem has one, otherwise from the grid (sampled at grid nodes,
/// so the lookup is exact).
inline LabeledSet sample_labeled(const Problem& pb, int n, std::span<const double> fixed_c, std::uint64_t seed,
                                 const SolutionGrid* grid = nullptr) {
  check_encoding(pb, fixed_c);
  const Layout& L = pb.layout();
  LabeledSet out;
  out.Z.resize(L.input_dim(), n);
  out.U.resize(pb.dim_u(), n);
  if (n == 0) return out;
  Rng rng(seed);
  if (pb.has_exact() && grid == nullptr) {
    detail::fill_time(pb, out.Z, rng, SamplingStrategy::kLatinHypercube);
    detail::fill_space(pb, out.Z, rng, SamplingStrategy::kLatinHypercube);
    std::vector<double> x(L.dim_x);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < L.dim_c; ++k) out.Z(L.c(k), j) = fixed_c[k];
      for (int i = 0; i < L.dim_x; ++i) x[i] = out.Z(L.x(i), j);
      const double t = L.has_time ? out.Z(L.t(), j) : 0.0;
      for (int comp = 0; comp < pb.dim_u(); ++comp) out.U(comp, j) = pb.exact(t, x, fixed_c, comp);
    }
    return out;
  }
  if (grid == nullptr) throw DataError("problem '" + pb.name() + "' has no closed form; a solution grid is required");
  if (grid->components() != pb.dim_u() || grid->space_dims() != L.dim_x || !L.has_time) {
    throw DataError("solution grid shape does not match problem '" + pb.name() + "'");
  }
  const auto nodes = grid->node_count();
  for (int j = 0; j < n; ++j) {
    const auto node = static_cast<std::size_t>(rng.below(nodes));
    auto [t, x] = grid->node_coords(node);
    out.Z(L.t(), j) = t;
    for (int i = 0; i < L.dim_x; ++i) out.Z(L.x(i), j) = x[i];
    for (int k = 0; k < L.dim_c; ++k) out.Z(L.c(k), j) = fixed_c[k];
    for (int comp = 0; comp < pb.dim_u(); ++comp) out.U(comp, j) = grid->at_node(node, comp);
  }
  return out;
}

/// Boundary points split equally over the faces (remainder round-robin)
/// and initial points over the domain at t = t0.
inline std::pair<BoundarySet, Eigen::MatrixXd> sample_boundary_initial(
    const Problem& pb, int n_b, int n_0, std::uint64_t seed,
    SamplingStrategy strategy = SamplingStrategy::kLatinHypercube) {
  if (n_b < 0 || n_0 < 0) throw ConfigError("point counts must be >= 0");
  const Layout& L = pb.layout();
  const int F = static_cast<int>(pb.faces().size());
  if (n_b > 0 && F == 0) throw ConfigError("problem '" + pb.name() + "' has no boundary faces but n_b > 0");
  if (n_0 > 0 && pb.initial_components() == 0) {
    throw ConfigError("problem '" + pb.name() + "' has no initial data but n_0 > 0");
  }
  Rng rng(seed);
  BoundarySet bs;
  bs.Z.resize(L.input_dim(), n_b);
  Eigen::Index col = 0;
  for (int f = 0; f < F; ++f) {
    const int count = n_b / F + (f < n_b % F ? 1 : 0);
    if (count == 0) continue;
    const Face& face = pb.faces()[f];
    Eigen::MatrixXd Zf(L.input_dim(), count);
    detail::fill_time(pb, Zf, rng, strategy);
    detail::fill_space(pb, Zf, rng, strategy, face.axis);
    Zf.row(L.x(face.axis)).setConstant(face.upper ? pb.x_hi()[face.axis] : pb.x_lo()[face.axis]);
    detail::fill_encoding(pb, Zf, rng, strategy);
    bs.Z.middleCols(col, count) = Zf;
    bs.face.insert(bs.face.end(), count, f);
    col += count;
  }
  Eigen::MatrixXd Z0(L.input_dim(), n_0);
  if (n_0 > 0) {
    Z0.row(L.t()).setConstant(pb.t0());
    detail::fill_space(pb, Z0, rng, strategy);
    detail::fill_encoding(pb, Z0, rng, strategy);
  }
  return {std::move(bs), std::move(Z0)};
}

struct SamplingConfig {
  int n_labeled = 20;
  std::vector<double> labeled_c;
  int n_residual = 1 << 12;
  int n_boundary = 512;
  int n_initial = 512;
  std::uint64_t seed = 0;
  SamplingStrategy strategy = SamplingStrategy::kLatinHypercube;
};

inline SamplingConfig default_sampling(const Problem& pb) {
  SamplingConfig s;
  const auto& d = pb.defaults();
  s.n_labeled = d.n_labeled;
  s.labeled_c = d.labeled_c;
  s.n_residual = d.n_residual;
  s.n_boundary = d.n_boundary;
  s.n_initial = pb.initial_components() > 0 ? d.n_initial : 0;
  return s;
}

inline TrainingSet make_training_set(const Problem& pb, const SamplingConfig& cfg, const SolutionGrid* grid = nullptr) {
  TrainingSet ts;
  ts.labeled = sample_labeled(pb, cfg.n_labeled, cfg.labeled_c, derive_seed(cfg.seed, 0), grid);
  ts.residual = sample_residual(pb, cfg.n_residual, derive_seed(cfg.seed, 1), cfg.strategy);
  auto [b, i] = sample_boundary_initial(pb, cfg.n_boundary, cfg.n_initial, derive_seed(cfg.seed, 2), cfg.strategy);
  ts.boundary = std::move(b);
  ts.initial = std::move(i);
  return ts;
}

/// Concatenates labeled sets (e.g. data at several encodings).
inline LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.Z.rows() != b.Z.rows() || a.U.rows() != b.U.rows()) throw ShapeError("labeled sets differ in shape");
  LabeledSet out;
  out.Z.resize(a.Z.rows(), a.size() + b.size());
  out.U.resize(a.U.rows(), a.size() + b.size());
  out.Z << a.Z, b.Z;
  out.U << a.U, b.U;
  return out;
}

}  // namespace cdpinn
