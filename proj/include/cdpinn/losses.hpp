#pragma once

// Training objective L = w_data L_data + w_res L_res + w_cd L_cd with
// per-term breakdown and parameter gradients.
//
// L_res: mean squared interior residual + boundary mismatch + initial
// mismatch. L_cd: the same three groups differentiated along each encoding
// component c_k, with the squared derivatives summed over k and averaged
// over points. Everything is read from jets of the network output; the
// gradient comes from one reverse pass per chunk of points.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/jet_engine.hpp"
#include "cdpinn/network.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/sampling.hpp"

namespace cdpinn {

struct LossWeights {
  double data = 1.0;
  double res = 1.0;
  double cd = 1.0;

  void validate() const {
    if (!(data >= 0.0) || !(res >= 0.0) || !(cd >= 0.0)) throw ConfigError("loss weights must be >= 0");
  }
};

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;
  double res = 0.0;
  double res_interior = 0.0;
  double res_boundary = 0.0;
  double res_initial = 0.0;
  double cd = 0.0;
  double cd_interior = 0.0;
  double cd_boundary = 0.0;
  double cd_initial = 0.0;
  LossWeights weights;
  bool cd_evaluated = false;

  void finish() {
    res = res_interior + res_boundary + res_initial;
    cd = cd_interior + cd_boundary + cd_initial;
    total = weights.data * data + weights.res * res + weights.cd * cd;
  }
};

struct LossResult {
  LossBreakdown breakdown;
  Eigen::VectorXd grad;
};

struct TermValue {
  double value = 0.0;
  Eigen::VectorXd grad;
};

struct LossOptions {
  bool grad = true;
  /// Evaluate L_cd even when its weight is zero (diagnostic for PINN runs).
  bool cd_when_unweighted = false;
  int chunk = 128;
};

/// Mean squared residual and mean summed squared c-derivative of one
/// constraint group, with adjoints of each mean w.r.t. the jet coefficients.
struct ConstraintTerms {
  double res = 0.0;
  double cd = 0.0;
  Eigen::MatrixXd adj_res;
  Eigen::MatrixXd adj_cd;
};

inline int constraint_components(const Problem& pb, ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kInterior: return pb.interior_components();
    case ConstraintKind::kBoundary: return pb.boundary_components();
    case ConstraintKind::kInitial: return pb.initial_components();
  }
  return 0;
}

inline IndexSetPtr constraint_index_set(const Problem& pb, ConstraintKind kind, bool with_cd) {
  switch (kind) {
    case ConstraintKind::kInterior: return interior_index_set(pb, with_cd);
    case ConstraintKind::kBoundary: return boundary_index_set(pb, with_cd);
    case ConstraintKind::kInitial: return initial_index_set(pb, with_cd);
  }
  return nullptr;
}

/// Sums (not means) over the columns of J; `scale` multiplies values and
/// adjoints (pass 1/N for a mean).
inline ConstraintTerms constraint_terms(const Problem& pb, ConstraintKind kind, const JetBatch& J,
                                        const Eigen::MatrixXd& Z, const int* faces, bool want_cd, bool want_adj,
                                        double scale) {
  ConstraintTerms out;
  const int P = J.points;
  const int m = pb.layout().dim_c;
  const int ncomp = constraint_components(pb, kind);
  if (want_adj) {
    out.adj_res = Eigen::MatrixXd::Zero(J.coeffs.rows(), J.coeffs.cols());
    if (want_cd) out.adj_cd = Eigen::MatrixXd::Zero(J.coeffs.rows(), J.coeffs.cols());
  }
  auto scatter = [&](Eigen::MatrixXd& adj, const detail::SlotMap& slots, const ResidualGrad& g, double w, int p) {
    for (int s = 0; s < slots.n; ++s) {
      adj(slots.comp[s], static_cast<Eigen::Index>(slots.pos[s]) * P + p) += w * g.g[s];
    }
  };
  for (int p = 0; p < P; ++p) {
    const int face = faces ? faces[p] : -1;
    for (int comp = 0; comp < ncomp; ++comp) {
      if (!want_cd) {
        detail::SlotMap slots;
        RS r = evaluate_constraint(pb, kind, J, Z, p, face, comp, -1, slots);
        out.res += r.v.v * r.v.v;
        if (want_adj) scatter(out.adj_res, slots, r.v, 2.0 * scale * r.v.v, p);
        continue;
      }
      for (int k = 0; k < m; ++k) {
        detail::SlotMap slots;
        RS r = evaluate_constraint(pb, kind, J, Z, p, face, comp, k, slots);
        if (k == 0) {
          out.res += r.v.v * r.v.v;
          if (want_adj) scatter(out.adj_res, slots, r.v, 2.0 * scale * r.v.v, p);
        }
        out.cd += r.d.v * r.d.v;
        if (want_adj) scatter(out.adj_cd, slots, r.d, 2.0 * scale * r.d.v, p);
      }
    }
  }
  out.res *= scale;
  out.cd *= scale;
  return out;
}

/// Supplies jets of the model output at a batch of inputs. Used to plug
/// closed-form solutions ("spy" models) into the loss.
using JetSource = std::function<JetBatch(const Eigen::MatrixXd&, const IndexSetPtr&)>;

inline JetSource exact_jet_source(const ProblemPtr& pb) {
  return [pb](const Eigen::MatrixXd& Z, const IndexSetPtr& set) { return exact_jets(*pb, Z, set); };
}

inline JetSource network_jet_source(const NetworkWeights& net) {
  return [&net](const Eigen::MatrixXd& Z, const IndexSetPtr& set) { return jet_forward(net, Z, set).first; };
}

namespace detail {

struct Group {
  ConstraintKind kind;
  const Eigen::MatrixXd* Z;
  const std::vector<int>* faces;
};

inline std::vector<Group> groups(const TrainingSet& ts) {
  return {{ConstraintKind::kInterior, &ts.residual, nullptr},
          {ConstraintKind::kBoundary, &ts.boundary.Z, &ts.boundary.face},
          {ConstraintKind::kInitial, &ts.initial, nullptr}};
}

inline void store(LossBreakdown& b, ConstraintKind kind, double res, double cd) {
  switch (kind) {
    case ConstraintKind::kInterior: b.res_interior += res, b.cd_interior += cd; break;
    case ConstraintKind::kBoundary: b.res_boundary += res, b.cd_boundary += cd; break;
    case ConstraintKind::kInitial: b.res_initial += res, b.cd_initial += cd; break;
  }
}

inline void check_labeled(const Problem& pb, const LabeledSet& d) {
  if (d.size() == 0) throw ConfigError("data loss needs at least one labeled point");
  if (d.U.rows() != pb.dim_u()) throw ShapeError("labeled values do not match the problem output dimension");
}

}  // namespace detail

/// Full objective with gradient. Points are processed in chunks; each chunk
/// is propagated, its adjoints seeded and reversed before the next.
inline LossResult total_loss(const NetworkWeights& net, const Problem& pb, const TrainingSet& ts,
                             const LossWeights& w, const LossOptions& opt = {}) {
  w.validate();
  LossResult out;
  out.breakdown.weights = w;
  if (opt.grad) out.grad = Eigen::VectorXd::Zero(net.param_count());
  const bool need_cd = w.cd > 0.0 || opt.cd_when_unweighted;
  out.breakdown.cd_evaluated = need_cd;

  if (w.data > 0.0) {
    detail::check_labeled(pb, ts.labeled);
    auto [J, tape] = jet_forward(net, ts.labeled.Z, primal_index_set());
    const Eigen::MatrixXd diff = J.coeffs - ts.labeled.U;
    const double n = ts.labeled.size();
    out.breakdown.data = diff.squaredNorm() / n;
    if (opt.grad) {
      Seed s{tape.id, (2.0 * w.data / n) * diff};
      out.grad += backprop_scalar(net, tape, s);
    }
  } else if (ts.labeled.size() > 0) {
    const Eigen::MatrixXd diff = eval_batch(net, ts.labeled.Z) - ts.labeled.U;
    out.breakdown.data = diff.squaredNorm() / ts.labeled.size();
  }

  for (const auto& g : detail::groups(ts)) {
    const int N = static_cast<int>(g.Z->cols());
    if (N == 0 || constraint_components(pb, g.kind) == 0) continue;
    const IndexSetPtr set = constraint_index_set(pb, g.kind, need_cd);
    const double scale = 1.0 / N;
    const int chunk = std::max(1, opt.chunk);
    for (int start = 0; start < N; start += chunk) {
      const int len = std::min(chunk, N - start);
      const Eigen::MatrixXd Zc = g.Z->middleCols(start, len);
      auto [J, tape] = jet_forward(net, Zc, set);
      const int* faces = g.faces ? g.faces->data() + start : nullptr;
      const bool adj = opt.grad && (w.res > 0.0 || w.cd > 0.0);
      ConstraintTerms t = constraint_terms(pb, g.kind, J, Zc, faces, need_cd, adj, scale);
      detail::store(out.breakdown, g.kind, t.res, t.cd);
      if (adj) {
        Eigen::MatrixXd seed = w.res * t.adj_res;
        if (need_cd && w.cd > 0.0) seed += w.cd * t.adj_cd;
        out.grad += backprop_scalar(net, tape, Seed{tape.id, std::move(seed)});
      }
    }
  }
  out.breakdown.finish();
  return out;
}

/// Loss terms for any jet source (no gradient).
inline LossBreakdown loss_breakdown(const JetSource& src, const Problem& pb, const TrainingSet& ts,
                                    const LossWeights& w = {}) {
  w.validate();
  LossBreakdown b;
  b.weights = w;
  b.cd_evaluated = true;
  if (ts.labeled.size() > 0) {
    const JetBatch J = src(ts.labeled.Z, primal_index_set());
    b.data = (J.coeffs - ts.labeled.U).squaredNorm() / ts.labeled.size();
  }
  for (const auto& g : detail::groups(ts)) {
    const int N = static_cast<int>(g.Z->cols());
    if (N == 0 || constraint_components(pb, g.kind) == 0) continue;
    const IndexSetPtr set = constraint_index_set(pb, g.kind, true);
    const JetBatch J = src(*g.Z, set);
    ConstraintTerms t = constraint_terms(pb, g.kind, J, *g.Z, g.faces ? g.faces->data() : nullptr, true, false, 1.0 / N);
    detail::store(b, g.kind, t.res, t.cd);
  }
  b.finish();
  return b;
}

inline TermValue loss_data(const NetworkWeights& net, const Problem& pb, const LabeledSet& labeled) {
  detail::check_labeled(pb, labeled);
  TrainingSet ts;
  ts.labeled = labeled;
  ts.residual.resize(net.in_dim(), 0);
  ts.boundary.Z.resize(net.in_dim(), 0);
  ts.initial.resize(net.in_dim(), 0);
  auto r = total_loss(net, pb, ts, {1.0, 0.0, 0.0});
  return {r.breakdown.data, std::move(r.grad)};
}

inline TermValue loss_res(const NetworkWeights& net, const Problem& pb, const TrainingSet& ts) {
  TrainingSet t = ts;
  t.labeled = {};
  auto r = total_loss(net, pb, t, {0.0, 1.0, 0.0});
  return {r.breakdown.res, std::move(r.grad)};
}

inline TermValue loss_cd(const NetworkWeights& net, const Problem& pb, const TrainingSet& ts) {
  TrainingSet t = ts;
  t.labeled = {};
  auto r = total_loss(net, pb, t, {0.0, 0.0, 1.0});
  return {r.breakdown.cd, std::move(r.grad)};
}

// --- expanded form (diffusion1d only) --------------------------------------

/// d/dc_k of the residual assembled term by term:
/// u_{t c_k} - (dP/du)(du/dc_k) - dP/dc_k with P = D u_xx, where the
/// linearized operator acts on du/dc_k as D u_{xx c_k} and P has no
/// explicit encoding dependence.
inline double diffusion_cd_expanded(const Diffusion1D& pb, const JetBatch& J, int p, int k) {
  const Layout& L = pb.layout();
  const int t = L.t(), x = L.x(0), c = L.c(k);
  const double u_tc = J(0, J.set->require(MultiIndex{t, c}), p);
  const double u_xxc = J(0, J.set->require(MultiIndex{x, x, c}), p);
  const double dP_du_times_du_dc = pb.D() * u_xxc;
  const double dP_dc = 0.0;
  return u_tc - dP_du_times_du_dc - dP_dc;
}

/// Interior L_cd of a network via the expanded form.
inline double loss_cd_interior_expanded(const NetworkWeights& net, const Diffusion1D& pb, const Eigen::MatrixXd& Z) {
  const auto set = interior_index_set(pb, true);
  const JetBatch J = jet_forward(net, Z, set).first;
  double s = 0.0;
  for (int p = 0; p < J.points; ++p) {
    for (int k = 0; k < pb.layout().dim_c; ++k) {
      const double v = diffusion_cd_expanded(pb, J, p, k);
      s += v * v;
    }
  }
  return s / J.points;
}

}  // namespace cdpinn
