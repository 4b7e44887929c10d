#pragma once

// Batched Taylor-mode forward propagation through a NetworkWeights and the
// reverse pass over that same computation (reverse-over-Taylor).
//
// Coefficient matrices use a column-block layout: for an index set of size
// S and P points, block `pos` occupies columns [pos*P, (pos+1)*P). The
// primal block (pos 0) is always multiplied separately so that evaluating
// with the index set {()} follows the same arithmetic as the primal block
// of any larger jet.

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "cdpinn/errors.hpp"
#include "cdpinn/jet.hpp"
#include "cdpinn/multi_index.hpp"
#include "cdpinn/network.hpp"

namespace cdpinn {

/// Jets of every network output at a batch of points.
struct JetBatch {
  IndexSetPtr set;
  int out_dim = 0;
  int points = 0;
  Eigen::MatrixXd coeffs;  // out_dim x (set->size() * points)

  double operator()(int comp, int pos, int p) const { return coeffs(comp, static_cast<Eigen::Index>(pos) * points + p); }
  auto block(int pos) const { return coeffs.middleCols(static_cast<Eigen::Index>(pos) * points, points); }

  Jet jet(int comp, int p) const {
    std::vector<double> c(set->size());
    for (int s = 0; s < set->size(); ++s) c[s] = (*this)(comp, s, p);
    return Jet(set, std::move(c));
  }
};

/// Record of one forward jet evaluation: everything the reverse pass reads.
struct Tape {
  struct Hidden {
    Eigen::MatrixXd pre;                // pre-activation coefficients
    Eigen::MatrixXd post;               // post-activation coefficients
    std::array<Eigen::ArrayXXd, 5> sig; // activation derivatives 0..4 at the primal
  };

  std::uint64_t id = 0;
  IndexSetPtr set;
  int points = 0;
  Eigen::MatrixXd input;  // raw z, in_dim x points
  Eigen::MatrixXd zn;     // normalized input
  std::vector<Hidden> hidden;
};

/// Adjoint of a scalar with respect to the coefficients produced by one tape.
struct Seed {
  std::uint64_t tape_id = 0;
  Eigen::MatrixXd adjoint;  // same shape as JetBatch::coeffs
};

namespace detail {

inline std::uint64_t next_tape_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

/// Coefficient buffers are a few hundred KB; by default glibc serves those
/// with mmap and unmaps them on free, so every chunk page-faults afresh.
inline void retain_freed_buffers() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

/// tanh via exp and log (both vectorized by Eigen, std::tanh is not), using
/// expm1(y) = (e^y - 1) y / log(e^y) to stay accurate near zero.
inline Eigen::ArrayXXd tanh_array(const Eigen::ArrayXXd& x) {
  const Eigen::ArrayXXd y = (2.0 * x.abs()).min(40.0);
  const Eigen::ArrayXXd u = y.exp();
  const Eigen::ArrayXXd em1 = (u == 1.0).select(y, (u - 1.0) * y / u.log());
  return x.sign() * em1 / (em1 + 2.0);
}

inline void activation_derivs(Activation act, const Eigen::MatrixXd& a0, std::array<Eigen::ArrayXXd, 5>& s) {
  const auto a = a0.array();
  if (act == Activation::kTanh) {
    s[0] = tanh_array(a);
    const Eigen::ArrayXXd sq = s[0].square();
    s[1] = 1.0 - sq;
    s[2] = -2.0 * s[0] * s[1];
    s[3] = -2.0 * s[1] * (1.0 - 3.0 * sq);
    s[4] = 8.0 * s[0] * s[1] * (2.0 - 3.0 * sq);
  } else {
    s[0] = a.sin();
    s[1] = a.cos();
    s[2] = -s[0];
    s[3] = -s[1];
    s[4] = s[0];
  }
}

/// Faa di Bruno over every index position, layer-wide.
inline void activation_forward(const MultiIndexSet& set, int P, const Eigen::MatrixXd& A,
                               const std::array<Eigen::ArrayXXd, 5>& s, Eigen::MatrixXd& H) {
  H.resize(A.rows(), A.cols());
  H.leftCols(P) = s[0].matrix();
  for (int pos = 1; pos < set.size(); ++pos) {
    auto out = H.middleCols(static_cast<Eigen::Index>(pos) * P, P).array();
    bool first = true;
    for (const auto& t : set.partitions(pos)) {
      auto blk = [&](int b) { return A.middleCols(static_cast<Eigen::Index>(t.blocks[b]) * P, P).array(); };
      if (first) {
        first = false;
        if (t.order == 1) {
          out = s[1] * blk(0);
        } else if (t.order == 2) {
          out = s[2] * blk(0) * blk(1);
        } else {
          out = s[3] * blk(0) * blk(1) * blk(2);
        }
      } else if (t.order == 1) {
        out += s[1] * blk(0);
      } else if (t.order == 2) {
        out += s[2] * blk(0) * blk(1);
      } else {
        out += s[3] * blk(0) * blk(1) * blk(2);
      }
    }
    if (first) out.setZero();
  }
}

inline Eigen::MatrixXd activation_backward(const MultiIndexSet& set, int P, const Tape::Hidden& h,
                                           const Eigen::MatrixXd& Hbar) {
  const auto& A = h.pre;
  const auto& s = h.sig;
  Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(A.rows(), A.cols());
  auto a0bar = Abar.leftCols(P).array();
  a0bar = Hbar.leftCols(P).array() * s[1];
  for (int pos = 1; pos < set.size(); ++pos) {
    const auto hb = Hbar.middleCols(static_cast<Eigen::Index>(pos) * P, P).array();
    for (const auto& t : set.partitions(pos)) {
      auto blk = [&](int b) { return A.middleCols(static_cast<Eigen::Index>(t.blocks[b]) * P, P).array(); };
      auto bar = [&](int b) { return Abar.middleCols(static_cast<Eigen::Index>(t.blocks[b]) * P, P).array(); };
      if (t.order == 1) {
        a0bar += hb * s[2] * blk(0);
        bar(0) += hb * s[1];
      } else if (t.order == 2) {
        a0bar += hb * s[3] * blk(0) * blk(1);
        bar(0) += hb * s[2] * blk(1);
        bar(1) += hb * s[2] * blk(0);
      } else {
        a0bar += hb * s[4] * blk(0) * blk(1) * blk(2);
        bar(0) += hb * s[3] * blk(1) * blk(2);
        bar(1) += hb * s[3] * blk(0) * blk(2);
        bar(2) += hb * s[3] * blk(0) * blk(1);
      }
    }
  }
  return Abar;
}

inline void check_input(const NetworkWeights& net, const Eigen::MatrixXd& Z, const MultiIndexSet& set) {
  if (Z.rows() != net.in_dim()) {
    throw ShapeError("input has " + std::to_string(Z.rows()) + " rows, network expects " +
                     std::to_string(net.in_dim()));
  }
  if (Z.cols() < 1) throw ShapeError("empty input batch");
  if (!Z.allFinite()) throw NumericInputError("non-finite network input");
  for (int c : set.tracked()) {
    if (c >= net.in_dim()) throw ShapeError("tracked coordinate " + std::to_string(c) + " outside input");
  }
}

}  // namespace detail

/// Forward Taylor propagation of the batch Z (in_dim x P) over `set`.
/// Returns the output jets and the tape needed for backprop.
inline std::pair<JetBatch, Tape> jet_forward(const NetworkWeights& net, const Eigen::MatrixXd& Z,
                                             const IndexSetPtr& set) {
  detail::check_input(net, Z, *set);
  detail::retain_freed_buffers();
  const int P = static_cast<int>(Z.cols());
  const int S = set->size();
  const Eigen::Index cols = static_cast<Eigen::Index>(S) * P;
  const int L = net.num_layers();

  Tape tape;
  tape.id = detail::next_tape_id();
  tape.set = set;
  tape.points = P;
  tape.input = Z;
  tape.zn = (Z.colwise() - net.input_shift()).array().colwise() * net.input_scale().array();
  tape.hidden.resize(L - 1);

  Eigen::MatrixXd A;
  for (int l = 0; l < L; ++l) {
    const auto W = net.W(l);
    A.resize(W.rows(), cols);
    if (l == 0) {
      A.setZero();
      A.leftCols(P).noalias() = W * tape.zn;
      for (int pos = 1; pos < S; ++pos) {
        const MultiIndex& mi = set->at(pos);
        if (mi.order() != 1) continue;
        const int c = mi[0];
        A.middleCols(static_cast<Eigen::Index>(pos) * P, P).colwise() += W.col(c) * net.input_scale()[c];
      }
    } else {
      const Eigen::MatrixXd& H = tape.hidden[l - 1].post;
      A.leftCols(P).noalias() = W * H.leftCols(P);
      if (S > 1) A.rightCols(cols - P).noalias() = W * H.rightCols(cols - P);
    }
    A.leftCols(P).colwise() += net.b(l);
    if (l == L - 1) break;
    auto& h = tape.hidden[l];
    detail::activation_derivs(net.activation(l), A.leftCols(P), h.sig);
    detail::activation_forward(*set, P, A, h.sig, h.post);
    h.pre = std::move(A);
    A = Eigen::MatrixXd();
  }

  JetBatch out;
  out.set = set;
  out.out_dim = net.out_dim();
  out.points = P;
  out.coeffs = std::move(A);
  return {std::move(out), std::move(tape)};
}

/// Single-point convenience: jets of output component `comp`.
inline std::pair<Jet, Tape> jet_forward(const NetworkWeights& net, std::span<const double> z,
                                        const IndexSetPtr& set, int comp = 0) {
  Eigen::MatrixXd Z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  if (static_cast<int>(z.size()) != net.in_dim()) throw ShapeError("input length mismatch");
  auto [batch, tape] = jet_forward(net, Z, set);
  return {batch.jet(comp, 0), std::move(tape)};
}

/// Recomputes the forward coefficients from a tape's recorded input.
inline JetBatch replay(const NetworkWeights& net, const Tape& tape) {
  return jet_forward(net, tape.input, tape.set).first;
}

/// Reverse pass: d(scalar)/d(theta), where the scalar's adjoints with
/// respect to each tape's output coefficients are given by `seeds`.
/// Accumulation over tapes is additive, in seed order.
inline Eigen::VectorXd backprop_scalar(const NetworkWeights& net, std::span<const Tape* const> tapes,
                                       std::span<const Seed> seeds) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  const int L = net.num_layers();
  for (const Seed& seed : seeds) {
    const Tape* tape = nullptr;
    for (const Tape* t : tapes) {
      if (t->id == seed.tape_id) tape = t;
    }
    if (!tape) throw ProvenanceError("seed references tape " + std::to_string(seed.tape_id) + " not in the tape set");
    const int P = tape->points;
    const MultiIndexSet& set = *tape->set;
    const Eigen::Index cols = static_cast<Eigen::Index>(set.size()) * P;
    if (seed.adjoint.rows() != net.out_dim() || seed.adjoint.cols() != cols) {
      throw ProvenanceError("seed adjoint shape does not match the coefficients of its tape");
    }
    if (static_cast<int>(tape->hidden.size()) != L - 1) throw ProvenanceError("tape recorded with another architecture");

    Eigen::MatrixXd Abar = seed.adjoint;
    for (int l = L - 1; l >= 0; --l) {
      Eigen::Map<Eigen::MatrixXd> gW(grad.data() + net.weight_offset(l), net.layer_out(l), net.layer_in(l));
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.bias_offset(l), net.layer_out(l));
      gb += Abar.leftCols(P).rowwise().sum();
      if (l > 0) {
        const auto& Hprev = tape->hidden[l - 1].post;
        gW.noalias() += Abar * Hprev.transpose();
        Eigen::MatrixXd Hbar = net.W(l).transpose() * Abar;
        Abar = detail::activation_backward(set, P, tape->hidden[l - 1], Hbar);
      } else {
        gW.noalias() += Abar.leftCols(P) * tape->zn.transpose();
        for (int pos = 1; pos < set.size(); ++pos) {
          const MultiIndex& mi = set.at(pos);
          if (mi.order() != 1) continue;
          const int c = mi[0];
          gW.col(c) += net.input_scale()[c] * Abar.middleCols(static_cast<Eigen::Index>(pos) * P, P).rowwise().sum();
        }
      }
    }
  }
  return grad;
}

inline Eigen::VectorXd backprop_scalar(const NetworkWeights& net, const Tape& tape, const Seed& seed) {
  const Tape* t = &tape;
  return backprop_scalar(net, std::span<const Tape* const>(&t, 1), std::span<const Seed>(&seed, 1));
}

// --- network evaluation (primal only) ------------------------------------

inline IndexSetPtr primal_index_set() {
  static const IndexSetPtr s = make_index_set({}, std::span<const MultiIndex>{});
  return s;
}

/// Network outputs at a batch of inputs (in_dim x P) -> out_dim x P.
inline Eigen::MatrixXd eval_batch(const NetworkWeights& net, const Eigen::MatrixXd& Z) {
  return jet_forward(net, Z, primal_index_set()).first.coeffs;
}

/// Output vector at one network input z = (t, x, c), or (x, c) for
/// stationary problems.
inline Eigen::VectorXd eval_point(const NetworkWeights& net, std::span<const double> z) {
  if (static_cast<int>(z.size()) != net.in_dim()) throw ShapeError("input length mismatch");
  Eigen::MatrixXd Z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return eval_batch(net, Z).col(0);
}

inline Eigen::VectorXd eval_point(const NetworkWeights& net, double t, std::span<const double> x,
                                  std::span<const double> c) {
  std::vector<double> z;
  z.push_back(t);
  z.insert(z.end(), x.begin(), x.end());
  z.insert(z.end(), c.begin(), c.end());
  return eval_point(net, z);
}

}  // namespace cdpinn
