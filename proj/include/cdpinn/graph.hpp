#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/random.hpp"

namespace cdpinn {

/// Undirected weighted graph with its Laplacian L = D_deg - A.
class GraphModel {
 public:
  GraphModel() = default;
  explicit GraphModel(Eigen::MatrixXd adjacency) : A_(std::move(adjacency)) {
    if (A_.rows() != A_.cols() || A_.rows() < 1) throw ShapeError("adjacency must be square and nonempty");
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
      if (A_(i, i) != 0.0) throw ShapeError("adjacency must have a zero diagonal");
      for (Eigen::Index j = 0; j < A_.cols(); ++j) {
        if (A_(i, j) < 0.0 || A_(i, j) != A_(j, i)) throw ShapeError("adjacency must be symmetric and nonnegative");
      }
    }
    deg_ = A_.rowwise().sum();
    L_ = -A_;
    L_.diagonal() += deg_;
    neighbors_.resize(A_.rows());
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
      for (Eigen::Index j = 0; j < A_.cols(); ++j) {
        if (A_(i, j) != 0.0) neighbors_[i].push_back(static_cast<int>(j));
      }
    }
  }

  int nodes() const { return static_cast<int>(A_.rows()); }
  const Eigen::MatrixXd& adjacency() const { return A_; }
  const Eigen::VectorXd& degree() const { return deg_; }
  const Eigen::MatrixXd& laplacian() const { return L_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

  bool connected() const {
    std::vector<char> seen(nodes(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      int i = q.front();
      q.pop();
      for (int j : neighbors_[i]) {
        if (!seen[j]) {
          seen[j] = 1;
          ++count;
          q.push(j);
        }
      }
    }
    return count == nodes();
  }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd deg_;
  Eigen::MatrixXd L_;
  std::vector<std::vector<int>> neighbors_;
};

/// Seeded connected Watts-Strogatz graph (ring lattice with k neighbors,
/// each edge rewired with probability p). Redraws until connected.
inline GraphModel make_synthetic_connectome(int n, std::uint64_t seed, int k = 6, double rewire = 0.2) {
  if (n < 2) throw ConfigError("connectome needs at least 2 nodes");
  const int half = std::max(1, std::min(k / 2, (n - 1) / 2));
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::set<std::pair<int, int>> edges;
    auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (int i = 0; i < n; ++i) {
      for (int j = 1; j <= half; ++j) edges.insert(key(i, (i + j) % n));
    }
    for (int j = 1; j <= half; ++j) {
      for (int i = 0; i < n; ++i) {
        auto e = key(i, (i + j) % n);
        if (e.first == e.second || rng.uniform() >= rewire || !edges.count(e)) continue;
        int target = static_cast<int>(rng.below(n));
        if (target == i || edges.count(key(i, target))) continue;
        edges.erase(e);
        edges.insert(key(i, target));
      }
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (auto [a, b] : edges) {
      if (a == b) continue;
      A(a, b) = A(b, a) = 1.0;
    }
    GraphModel g(std::move(A));
    if (g.connected()) return g;
  }
  throw SolverError("could not draw a connected graph");
}

}  // namespace cdpinn
