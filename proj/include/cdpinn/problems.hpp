#pragma once

// Parameterized PDE problems. Each problem defines its coordinate layout
// (t?, x..., c...), residual operator, boundary faces, initial data and,
// where available, a closed-form solution.
//
// Residuals are written once as templates over the scalar type; the loss
// evaluates them with Dual<Grad<N>> so that the residual, its total
// derivative along one encoding component and the gradients of both with
// respect to the jet coefficients come out of a single pass.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/graph.hpp"
#include "cdpinn/jet.hpp"
#include "cdpinn/jet_engine.hpp"
#include "cdpinn/multi_index.hpp"
#include "cdpinn/scalar.hpp"

namespace cdpinn {

/// Positions of t, x_i and c_k inside the network input vector.
struct Layout {
  bool has_time = true;
  int dim_x = 1;
  int dim_c = 1;

  int input_dim() const { return (has_time ? 1 : 0) + dim_x + dim_c; }
  int t() const {
    if (!has_time) throw ShapeError("problem has no time coordinate");
    return 0;
  }
  int x(int i) const { return (has_time ? 1 : 0) + i; }
  int c(int k) const { return (has_time ? 1 : 0) + dim_x + k; }
  std::vector<int> all_coords() const {
    std::vector<int> v(input_dim());
    for (int i = 0; i < input_dim(); ++i) v[i] = i;
    return v;
  }
};

/// Evaluation context handed to residual templates.
template <class T>
struct Ctx {
  const Layout* layout = nullptr;
  double t = 0.0;
  std::span<const double> x;
  std::span<const T> c;
  std::function<T(int, const MultiIndex&)> lookup;

  T u(const MultiIndex& a = {}, int comp = 0) const { return lookup(comp, a); }
  T u_t(int comp = 0) const { return lookup(comp, MultiIndex{layout->t()}); }
  T u_x(int i, int comp = 0) const { return lookup(comp, MultiIndex{layout->x(i)}); }
  T u_xx(int i, int comp = 0) const { return lookup(comp, MultiIndex{layout->x(i), layout->x(i)}); }
  T u_tt(int comp = 0) const { return lookup(comp, MultiIndex{layout->t(), layout->t()}); }
};

enum class BoundaryKind { kDirichlet, kNeumann };

struct Face {
  std::string name;
  int axis = 0;        // spatial axis the face is normal to
  bool upper = false;  // at the upper bound of that axis
  BoundaryKind kind = BoundaryKind::kDirichlet;
};

/// Paper-default experiment configuration for a problem.
struct ProblemDefaults {
  std::vector<double> labeled_c;
  int n_labeled = 20;
  int n_residual = 1 << 12;
  int n_boundary = 512;
  int n_initial = 512;
};

using ProblemOptions = std::map<std::string, double>;

using RS = ResidualScalar;

class Problem {
 public:
  virtual ~Problem() = default;

  const std::string& name() const { return name_; }
  const Layout& layout() const { return layout_; }
  int dim_u() const { return dim_u_; }
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  const std::vector<double>& x_lo() const { return x_lo_; }
  const std::vector<double>& x_hi() const { return x_hi_; }
  const std::vector<std::string>& c_names() const { return c_names_; }
  const std::vector<double>& c_lo() const { return c_lo_; }
  const std::vector<double>& c_hi() const { return c_hi_; }
  const std::vector<Face>& faces() const { return faces_; }
  const ProblemDefaults& defaults() const { return defaults_; }

  int encoding_index(const std::string& n) const {
    for (size_t k = 0; k < c_names_.size(); ++k) {
      if (c_names_[k] == n) return static_cast<int>(k);
    }
    throw ConfigError("problem '" + name_ + "' has no encoding component '" + n + "'");
  }

  /// Lower/upper corner of the full input box (t, x, c).
  Eigen::VectorXd input_lo() const { return corner(true); }
  Eigen::VectorXd input_hi() const { return corner(false); }

  /// Derivative patterns (per output component) the interior residual reads.
  virtual std::vector<MultiIndex> interior_stencil() const = 0;
  virtual int interior_components() const { return dim_u_; }
  virtual RS interior(const Ctx<RS>& q, int comp) const = 0;

  virtual std::vector<MultiIndex> boundary_stencil(int face) const {
    const Face& f = faces_.at(face);
    if (f.kind == BoundaryKind::kNeumann) return {MultiIndex{layout_.x(f.axis)}};
    return {MultiIndex{}};
  }
  virtual int boundary_components() const { return dim_u_; }
  /// Prescribed boundary data g (Dirichlet value or outward normal flux).
  virtual RS boundary_value(int face, double t, std::span<const double> x, std::span<const RS> c, int comp) const = 0;
  RS boundary(const Ctx<RS>& q, int face, int comp) const {
    const Face& f = faces_.at(face);
    RS lhs = f.kind == BoundaryKind::kNeumann ? (f.upper ? q.u_x(f.axis, comp) : -q.u_x(f.axis, comp)) : q.u({}, comp);
    return lhs - boundary_value(face, q.t, q.x, q.c, comp);
  }

  virtual std::vector<MultiIndex> initial_stencil() const { return {MultiIndex{}}; }
  virtual int initial_components() const { return layout_.has_time ? dim_u_ : 0; }
  virtual RS initial_value(std::span<const double> x, std::span<const RS> c, int comp) const = 0;
  virtual RS initial(const Ctx<RS>& q, int comp) const { return q.u({}, comp) - initial_value(q.x, q.c, comp); }

  virtual bool has_exact() const { return false; }
  virtual double exact(double t, std::span<const double> x, std::span<const double> c, int comp = 0) const {
    (void)t, (void)x, (void)c, (void)comp;
    throw UnsupportedError("problem '" + name_ + "' has no closed-form solution");
  }
  /// Closed-form solution evaluated on jets (for substitution checks).
  virtual Jet exact_jet(const Jet& t, std::span<const Jet> x, std::span<const Jet> c) const {
    (void)t, (void)x, (void)c;
    throw UnsupportedError("problem '" + name_ + "' has no closed-form solution");
  }

  double boundary_value(int face, double t, std::span<const double> x, std::span<const double> c, int comp = 0) const {
    auto cs = lift(c);
    return primal(boundary_value(face, t, x, cs, comp));
  }
  double initial_value(std::span<const double> x, std::span<const double> c, int comp = 0) const {
    auto cs = lift(c);
    return primal(initial_value(x, cs, comp));
  }

  /// Exact-solution jets at input z over `set`, for every output component.
  Jet exact_jet_at(std::span<const double> z, const IndexSetPtr& set) const {
    const Layout& L = layout_;
    Jet t = L.has_time ? Jet::variable(set, L.t(), z[L.t()]) : Jet(set, 0.0);
    std::vector<Jet> x, c;
    for (int i = 0; i < L.dim_x; ++i) x.push_back(Jet::variable(set, L.x(i), z[L.x(i)]));
    for (int k = 0; k < L.dim_c; ++k) c.push_back(Jet::variable(set, L.c(k), z[L.c(k)]));
    return exact_jet(t, x, c);
  }

 protected:
  static std::vector<RS> lift(std::span<const double> c) { return {c.begin(), c.end()}; }

  Eigen::VectorXd corner(bool lo) const {
    Eigen::VectorXd v(layout_.input_dim());
    int i = 0;
    if (layout_.has_time) v[i++] = lo ? t0_ : t1_;
    for (int d = 0; d < layout_.dim_x; ++d) v[i++] = lo ? x_lo_[d] : x_hi_[d];
    for (int k = 0; k < layout_.dim_c; ++k) v[i++] = lo ? c_lo_[k] : c_hi_[k];
    return v;
  }

  void validate() const {
    if (static_cast<int>(x_lo_.size()) != layout_.dim_x || static_cast<int>(x_hi_.size()) != layout_.dim_x) {
      throw ConfigError(name_ + ": spatial bounds do not match dimension");
    }
    if (static_cast<int>(c_lo_.size()) != layout_.dim_c || static_cast<int>(c_names_.size()) != layout_.dim_c) {
      throw ConfigError(name_ + ": encoding schema does not match dimension");
    }
    for (int k = 0; k < layout_.dim_c; ++k) {
      if (!(c_lo_[k] < c_hi_[k])) throw ConfigError(name_ + ": empty encoding range for " + c_names_[k]);
    }
    for (int d = 0; d < layout_.dim_x; ++d) {
      if (!(x_lo_[d] < x_hi_[d])) throw ConfigError(name_ + ": empty spatial interval");
    }
    if (layout_.has_time && !(t0_ < t1_)) throw ConfigError(name_ + ": empty time interval");
  }

  std::string name_;
  Layout layout_;
  int dim_u_ = 1;
  double t0_ = 0.0, t1_ = 1.0;
  std::vector<double> x_lo_, x_hi_;
  std::vector<std::string> c_names_;
  std::vector<double> c_lo_, c_hi_;
  std::vector<Face> faces_;
  ProblemDefaults defaults_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// Residual value and its total derivatives along each encoding component.
struct ResidualEval {
  double r = 0.0;
  std::vector<double> dr_dc;
};

namespace detail {

/// Tracks which (component, coefficient) pairs a residual evaluation read,
/// assigning each a gradient slot.
struct SlotMap {
  std::array<int, kResidualSlots> comp{};
  std::array<int, kResidualSlots> pos{};
  int n = 0;

  int get(int c, int p) {
    for (int i = 0; i < n; ++i) {
      if (comp[i] == c && pos[i] == p) return i;
    }
    if (n == kResidualSlots) throw StencilError("residual reads more coefficients than the slot capacity");
    comp[n] = c;
    pos[n] = p;
    return n++;
  }
};

/// Builds the lookup for point p of `J`, tangent along encoding k (k < 0
/// means no tangent).
inline std::function<RS(int, const MultiIndex&)> make_lookup(const JetBatch& J, int p, int tangent_coord,
                                                             SlotMap& slots) {
  return [&J, p, tangent_coord, &slots](int comp, const MultiIndex& a) -> RS {
    if (comp < 0 || comp >= J.out_dim) throw ShapeError("output component out of range");
    const int pos = J.set->require(a);
    RS r;
    r.v = ResidualGrad::seed(J(comp, pos, p), slots.get(comp, pos));
    if (tangent_coord >= 0) {
      const int aug = J.set->augment(pos, tangent_coord);
      if (aug < 0) {
        throw StencilError("jet lacks the encoding-augmented coefficient of " + a.str() + " along coordinate " +
                           std::to_string(tangent_coord));
      }
      r.d = ResidualGrad::seed(J(comp, aug, p), slots.get(comp, aug));
    }
    return r;
  };
}

}  // namespace detail

enum class ConstraintKind { kInterior, kBoundary, kInitial };

/// Evaluates one residual component of a constraint at point p of a jet
/// batch with tangent along encoding component k (k < 0: none).
inline RS evaluate_constraint(const Problem& pb, ConstraintKind kind, const JetBatch& J, const Eigen::MatrixXd& Z,
                              int p, int face, int comp, int k, detail::SlotMap& slots) {
  const Layout& L = pb.layout();
  Ctx<RS> q;
  q.layout = &L;
  q.t = L.has_time ? Z(L.t(), p) : 0.0;
  std::array<double, 16> xbuf{};
  if (L.dim_x > 16) throw ShapeError("too many spatial dimensions");
  for (int i = 0; i < L.dim_x; ++i) xbuf[i] = Z(L.x(i), p);
  q.x = std::span<const double>(xbuf.data(), L.dim_x);
  std::vector<RS> c(L.dim_c);
  for (int j = 0; j < L.dim_c; ++j) {
    c[j] = RS(Z(L.c(j), p));
    if (j == k) c[j].d = ResidualGrad(1.0);
  }
  q.c = c;
  q.lookup = detail::make_lookup(J, p, k >= 0 ? L.c(k) : -1, slots);
  switch (kind) {
    case ConstraintKind::kInterior: return pb.interior(q, comp);
    case ConstraintKind::kBoundary: return pb.boundary(q, face, comp);
    case ConstraintKind::kInitial: return pb.initial(q, comp);
  }
  return {};
}

/// Patterns `stencil` closed under one extra derivative along each encoding
/// component (when with_cd).
inline std::vector<MultiIndex> augment_stencil(const Problem& pb, const std::vector<MultiIndex>& stencil, bool with_cd) {
  std::vector<MultiIndex> out = stencil;
  if (with_cd) {
    for (const auto& s : stencil) {
      for (int k = 0; k < pb.layout().dim_c; ++k) out.push_back(s.plus(pb.layout().c(k)));
    }
  }
  return out;
}

inline IndexSetPtr interior_index_set(const Problem& pb, bool with_cd) {
  auto pats = augment_stencil(pb, pb.interior_stencil(), with_cd);
  return make_index_set(pb.layout().all_coords(), std::span<const MultiIndex>(pats));
}

inline IndexSetPtr boundary_index_set(const Problem& pb, bool with_cd) {
  std::vector<MultiIndex> st;
  for (int f = 0; f < static_cast<int>(pb.faces().size()); ++f) {
    auto s = pb.boundary_stencil(f);
    st.insert(st.end(), s.begin(), s.end());
  }
  if (st.empty()) st.push_back(MultiIndex{});
  auto pats = augment_stencil(pb, st, with_cd);
  return make_index_set(pb.layout().all_coords(), std::span<const MultiIndex>(pats));
}

inline IndexSetPtr initial_index_set(const Problem& pb, bool with_cd) {
  auto pats = augment_stencil(pb, pb.initial_stencil(), with_cd);
  return make_index_set(pb.layout().all_coords(), std::span<const MultiIndex>(pats));
}

/// Residual of the governing equation (interior) at one point, read from a
/// jet of the solution; dr/dc_k follow the chain rule through every
/// occurrence of c and u. The jet must carry the c-augmented stencil.
inline ResidualEval residual(const Problem& pb, const JetBatch& J, const Eigen::MatrixXd& Z, int p, int comp = 0) {
  ResidualEval out;
  const int m = pb.layout().dim_c;
  for (int k = 0; k < m; ++k) {
    detail::SlotMap slots;
    RS r = evaluate_constraint(pb, ConstraintKind::kInterior, J, Z, p, -1, comp, k, slots);
    if (k == 0) out.r = r.v.v;
    out.dr_dc.push_back(r.d.v);
  }
  return out;
}

/// Single-point form for scalar problems: jet of u at z = (t, x, c).
inline ResidualEval residual(const Problem& pb, const Jet& jet, std::span<const double> z) {
  JetBatch J;
  J.set = jet.index_set();
  J.out_dim = 1;
  J.points = 1;
  J.coeffs = Eigen::Map<const Eigen::RowVectorXd>(jet.coeffs().data(), static_cast<Eigen::Index>(jet.coeffs().size()));
  Eigen::MatrixXd Z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return residual(pb, J, Z, 0);
}

/// Input vector z = (t, x, c) in the problem's layout.
inline Eigen::VectorXd make_input(const Problem& pb, double t, std::span<const double> x, std::span<const double> c) {
  const Layout& L = pb.layout();
  if (static_cast<int>(x.size()) != L.dim_x || static_cast<int>(c.size()) != L.dim_c) {
    throw ShapeError("point dimensions do not match problem '" + pb.name() + "'");
  }
  Eigen::VectorXd z(L.input_dim());
  if (L.has_time) z[L.t()] = t;
  for (int i = 0; i < L.dim_x; ++i) z[L.x(i)] = x[i];
  for (int k = 0; k < L.dim_c; ++k) z[L.c(k)] = c[k];
  return z;
}

/// Exact-solution jets for a batch of inputs ("spy" coefficients).
inline JetBatch exact_jets(const Problem& pb, const Eigen::MatrixXd& Z, const IndexSetPtr& set) {
  JetBatch J;
  J.set = set;
  J.out_dim = 1;
  J.points = static_cast<int>(Z.cols());
  J.coeffs.resize(1, static_cast<Eigen::Index>(set->size()) * J.points);
  for (int p = 0; p < J.points; ++p) {
    std::vector<double> z(Z.col(p).data(), Z.col(p).data() + Z.rows());
    Jet j = pb.exact_jet_at(z, set);
    for (int s = 0; s < set->size(); ++s) J.coeffs(0, static_cast<Eigen::Index>(s) * J.points + p) = j.coeff(s);
  }
  return J;
}

// ---------------------------------------------------------------------------
// Concrete problems

/// CRTP helper for scalar-output problems with templated residuals.
template <class Derived>
class ScalarProblem : public Problem {
 public:
  RS interior(const Ctx<RS>& q, int) const override { return self().pde(q); }
  RS boundary_value(int face, double t, std::span<const double> x, std::span<const RS> c, int) const override {
    return self().g(face, t, x, c);
  }
  RS initial_value(std::span<const double> x, std::span<const RS> c, int) const override { return self().u0(x, c); }

  using Problem::boundary_value;
  using Problem::initial_value;

 protected:
  const Derived& self() const { return static_cast<const Derived&>(*this); }

  /// Closed-form solution with double t, x lifted to T.
  template <class T>
  T solution_at(double t, std::span<const double> x, std::span<const T> c) const {
    std::vector<T> xs(x.begin(), x.end());
    return self().template solution<T>(T(t), std::span<const T>(xs), c);
  }
};

/// Helper: closed-form problems route exact()/exact_jet() through the
/// templated solution.
template <class Derived>
class ClosedFormProblem : public ScalarProblem<Derived> {
 public:
  bool has_exact() const override { return true; }
  double exact(double t, std::span<const double> x, std::span<const double> c, int = 0) const override {
    return this->self().template solution<double>(t, x, c);
  }
  Jet exact_jet(const Jet& t, std::span<const Jet> x, std::span<const Jet> c) const override {
    return this->self().template solution<Jet>(t, x, c);
  }
};

/// 1D diffusion p_t = D p_xx with a two-Gaussian initial profile; encoding
/// (sigma, mu) of the first Gaussian, second fixed at (sigma1, mu1).
class Diffusion1D : public ClosedFormProblem<Diffusion1D> {
 public:
  Diffusion1D(std::string name, double D, double t0, double t1, double sigma1 = 1.0, double mu1 = 5.0)
      : D_(D), sigma1_(sigma1), mu1_(mu1) {
    name_ = std::move(name);
    layout_ = {true, 1, 2};
    t0_ = t0;
    t1_ = t1;
    x_lo_ = {-10.0};
    x_hi_ = {10.0};
    c_names_ = {"sigma", "mu"};
    c_lo_ = {0.1, -5.0};
    c_hi_ = {10.0, 5.0};
    faces_ = {{"x=-10", 0, false, BoundaryKind::kDirichlet}, {"x=10", 0, true, BoundaryKind::kDirichlet}};
    defaults_ = {{1.0, -5.0}, 20, 1 << 14, 512, 1024};
    validate();
  }

  double D() const { return D_; }
  double sigma1() const { return sigma1_; }
  double mu1() const { return mu1_; }

  /// Time at which the variance sigma^2 + 2 D t reaches zero (infinity for D >= 0).
  double blow_up_time(double sigma) const {
    return D_ < 0.0 ? std::min(sigma * sigma, sigma1_ * sigma1_) / (-2.0 * D_) : INFINITY;
  }

  std::vector<MultiIndex> interior_stencil() const override {
    const int t = layout_.t(), x = layout_.x(0);
    return {MultiIndex{t}, MultiIndex{x, x}};
  }

  template <class T>
  T pde(const Ctx<T>& q) const {
    return q.u_t() - D_ * q.u_xx(0);
  }

  template <class T>
  T solution(const T& t, std::span<const T> x, std::span<const T> c) const {
    return gaussian(t, x[0], c[0], c[1]) + gaussian(t, x[0], sigma1_, mu1_);
  }

  template <class T>
  T g(int, double t, std::span<const double> x, std::span<const T> c) const {
    return this->solution_at<T>(t, x, c);
  }
  template <class T>
  T u0(std::span<const double> x, std::span<const T> c) const {
    return this->solution_at<T>(t0_, x, c);
  }

 private:
  template <class T, class S>
  T gaussian(const T& t, const T& x, const S& sigma, const S& mu) const {
    using std::exp;
    using std::sqrt;
    T var = sigma * sigma + 2.0 * D_ * t;
    // variance within rounding of zero counts as blown up
    if (!(primal(var) > 64.0 * std::numeric_limits<double>::epsilon() * primal(sigma) * primal(sigma))) {
      throw BlowUpError("closed-form diffusion solution undefined: variance sigma^2 + 2Dt = " +
                        std::to_string(primal(var)) + " <= 0 (blow-up at t = " +
                        std::to_string(primal(sigma) * primal(sigma) / (-2.0 * D_)) + ")");
    }
    T dx = x - mu;
    return 10.0 / sqrt(2.0 * M_PI * var) * exp(-(dx * dx) / (2.0 * var));
  }

  double D_, sigma1_, mu1_;
};

/// 2D wave u_tt = c^2 (u_xx + u_yy) on the unit square, encoding (c, k).
class Wave2D : public ClosedFormProblem<Wave2D> {
 public:
  Wave2D() {
    name_ = "wave2d";
    layout_ = {true, 2, 2};
    t0_ = 0.0;
    t1_ = 0.5;
    x_lo_ = {0.0, 0.0};
    x_hi_ = {1.0, 1.0};
    c_names_ = {"c", "k"};
    c_lo_ = {0.01, 0.01};
    c_hi_ = {1.0, 1.0};
    faces_ = {{"x=0", 0, false, BoundaryKind::kDirichlet},
              {"x=1", 0, true, BoundaryKind::kDirichlet},
              {"y=0", 1, false, BoundaryKind::kDirichlet},
              {"y=1", 1, true, BoundaryKind::kDirichlet}};
    defaults_ = {{0.505, 0.505}, 20, 1 << 13, 512, 512};
    validate();
  }

  std::vector<MultiIndex> interior_stencil() const override {
    const int t = layout_.t(), x = layout_.x(0), y = layout_.x(1);
    return {MultiIndex{t, t}, MultiIndex{x, x}, MultiIndex{y, y}};
  }
  template <class T>
  T pde(const Ctx<T>& q) const {
    const T& c = q.c[0];
    return q.u_tt() - c * c * (q.u_xx(0) + q.u_xx(1));
  }

  template <class T>
  T solution(const T& t, std::span<const T> x, std::span<const T> c) const {
    using std::cos;
    using std::sin;
    const T& k = c[1];
    return 10.0 * sin(k * x[0]) * sin(k * x[1]) * cos(std::sqrt(2.0) * c[0] * k * t);
  }
  template <class T>
  T g(int face, double t, std::span<const double> x, std::span<const T> c) const {
    using std::cos;
    using std::sin;
    const T& k = c[1];
    const T wave = cos(std::sqrt(2.0) * c[0] * k * t);
    switch (face) {
      case 0: return T(0.0);
      case 1: return 10.0 * sin(k) * sin(k * x[1]) * wave;
      case 2: return T(0.0);
      default: return 10.0 * sin(k * x[0]) * sin(k) * wave;
    }
  }
  template <class T>
  T u0(std::span<const double> x, std::span<const T> c) const {
    using std::sin;
    return 10.0 * sin(c[1] * x[0]) * sin(c[1] * x[1]);
  }

  // Initial data also fixes u_t(x, y, 0) = 0.
  std::vector<MultiIndex> initial_stencil() const override { return {MultiIndex{}, MultiIndex{layout_.t()}}; }
  int initial_components() const override { return 2; }
  RS initial(const Ctx<RS>& q, int comp) const override {
    if (comp == 0) return q.u() - u0<RS>(q.x, q.c);
    return q.u_t();
  }
};

/// 2D Poisson u_xx + u_yy = -(a^2 + b^2) cos(ax) sin(by) on [0, pi]^2.
class Poisson2D : public ClosedFormProblem<Poisson2D> {
 public:
  Poisson2D() {
    name_ = "poisson2d";
    layout_ = {false, 2, 2};
    x_lo_ = {0.0, 0.0};
    x_hi_ = {M_PI, M_PI};
    c_names_ = {"a", "b"};
    c_lo_ = {0.0, 0.0};
    c_hi_ = {5.0, 5.0};
    faces_ = {{"x=0", 0, false, BoundaryKind::kDirichlet},
              {"x=pi", 0, true, BoundaryKind::kDirichlet},
              {"y=0", 1, false, BoundaryKind::kDirichlet},
              {"y=pi", 1, true, BoundaryKind::kDirichlet}};
    defaults_ = {{2.45, 2.45}, 20, 1 << 11, 512, 0};
    validate();
  }

  std::vector<MultiIndex> interior_stencil() const override {
    const int x = layout_.x(0), y = layout_.x(1);
    return {MultiIndex{x, x}, MultiIndex{y, y}};
  }
  template <class T>
  T pde(const Ctx<T>& q) const {
    using std::cos;
    using std::sin;
    const T& a = q.c[0];
    const T& b = q.c[1];
    return q.u_xx(0) + q.u_xx(1) + (a * a + b * b) * cos(a * q.x[0]) * sin(b * q.x[1]);
  }
  template <class T>
  T solution(const T&, std::span<const T> x, std::span<const T> c) const {
    using std::cos;
    using std::sin;
    return cos(c[0] * x[0]) * sin(c[1] * x[1]);
  }
  template <class T>
  T g(int face, double, std::span<const double> x, std::span<const T> c) const {
    using std::cos;
    using std::sin;
    const T& a = c[0];
    const T& b = c[1];
    switch (face) {
      case 0: return sin(b * x[1]);
      case 1: return cos(a * M_PI) * sin(b * x[1]);
      case 2: return T(0.0);
      default: return cos(a * x[0]) * sin(b * M_PI);
    }
  }
  template <class T>
  T u0(std::span<const double>, std::span<const T>) const {
    throw UnsupportedError("poisson2d is stationary and has no initial data");
  }
};

/// d-dimensional diffusion-reaction u_t = D lap(u) - lambda u with a
/// Gaussian initial profile; encoding (D, lambda) with lambda > 0 the decay
/// magnitude.
class DiffReactND : public ClosedFormProblem<DiffReactND> {
 public:
  explicit DiffReactND(int d, double sigma = 0.1) : sigma_(sigma) {
    if (d < 1 || d > 16) throw ConfigError("diffreact-nd: dimension must be in [1, 16]");
    name_ = "diffreact-nd";
    layout_ = {true, d, 2};
    t0_ = 0.0;
    t1_ = 0.1;
    x_lo_.assign(d, 0.0);
    x_hi_.assign(d, 0.1);
    c_names_ = {"D", "lambda"};
    c_lo_ = {0.01, 0.01};
    c_hi_ = {0.1, 0.1};
    for (int i = 0; i < d; ++i) {
      faces_.push_back({"x" + std::to_string(i) + "=0", i, false, BoundaryKind::kDirichlet});
      faces_.push_back({"x" + std::to_string(i) + "=0.1", i, true, BoundaryKind::kDirichlet});
    }
    defaults_ = {{0.06, 0.06}, 100, 1 << 13, 512, 512};
    validate();
  }

  int dim() const { return layout_.dim_x; }
  double sigma() const { return sigma_; }

  std::vector<MultiIndex> interior_stencil() const override {
    std::vector<MultiIndex> s{MultiIndex{}, MultiIndex{layout_.t()}};
    for (int i = 0; i < dim(); ++i) s.push_back(MultiIndex{layout_.x(i), layout_.x(i)});
    return s;
  }
  template <class T>
  T pde(const Ctx<T>& q) const {
    T lap = q.u_xx(0);
    for (int i = 1; i < dim(); ++i) lap = lap + q.u_xx(i);
    return q.u_t() - q.c[0] * lap + q.c[1] * q.u();
  }
  template <class T>
  T solution(const T& t, std::span<const T> x, std::span<const T> c) const {
    using std::exp;
    using std::pow;
    T var = sigma_ * sigma_ + 2.0 * c[0] * t;
    T r2 = x[0] * x[0];
    for (int i = 1; i < dim(); ++i) r2 = r2 + x[i] * x[i];
    return pow(2.0 * M_PI * var, -0.5 * dim()) * exp(-r2 / (2.0 * var)) * exp(-(c[1] * t));
  }
  template <class T>
  T g(int, double t, std::span<const double> x, std::span<const T> c) const {
    return this->solution_at<T>(t, x, c);
  }
  template <class T>
  T u0(std::span<const double> x, std::span<const T> c) const {
    return this->solution_at<T>(0.0, x, c);
  }

 private:
  double sigma_;
};

/// Viscous Burgers u_t + u u_x = nu u_xx on [-1, 1], u(x, 0) = -sin(pi x).
class Burgers1D : public ScalarProblem<Burgers1D> {
 public:
  Burgers1D() {
    name_ = "burgers1d";
    layout_ = {true, 1, 1};
    t0_ = 0.0;
    t1_ = 0.5;
    x_lo_ = {-1.0};
    x_hi_ = {1.0};
    c_names_ = {"nu"};
    c_lo_ = {0.01};
    c_hi_ = {0.1};
    faces_ = {{"x=-1", 0, false, BoundaryKind::kDirichlet}, {"x=1", 0, true, BoundaryKind::kDirichlet}};
    defaults_ = {{0.05}, 20, 1 << 13, 512, 512};
    validate();
  }

  std::vector<MultiIndex> interior_stencil() const override {
    const int t = layout_.t(), x = layout_.x(0);
    return {MultiIndex{}, MultiIndex{t}, MultiIndex{x}, MultiIndex{x, x}};
  }
  template <class T>
  T pde(const Ctx<T>& q) const {
    return q.u_t() + q.u() * q.u_x(0) - q.c[0] * q.u_xx(0);
  }
  template <class T>
  T g(int, double, std::span<const double>, std::span<const T>) const {
    return T(0.0);
  }
  template <class T>
  T u0(std::span<const double> x, std::span<const T>) const {
    return T(-std::sin(M_PI * x[0]));
  }
};

/// Parameters of the Gaussian initial bump for the continuum F-K problem.
struct FkProfile {
  double amplitude = 0.5;
  double center = 0.5;
  double width = 0.1;
  double operator()(double x) const {
    const double d = x - center;
    return amplitude * std::exp(-d * d / (2.0 * width * width));
  }
};

/// Continuum Fisher-Kolmogorov u_t = D u_xx + alpha u (1 - u) on [0, 1]
/// with zero-flux boundaries; encoding (D, alpha).
class FkContinuous : public ScalarProblem<FkContinuous> {
 public:
  explicit FkContinuous(double T = 1.0, FkProfile profile = {}) : profile_(profile) {
    name_ = "fk-continuous";
    layout_ = {true, 1, 2};
    t0_ = 0.0;
    t1_ = T;
    x_lo_ = {0.0};
    x_hi_ = {1.0};
    c_names_ = {"D", "alpha"};
    c_lo_ = {0.05, 0.5};
    c_hi_ = {0.5, 1.5};
    faces_ = {{"x=0", 0, false, BoundaryKind::kNeumann}, {"x=1", 0, true, BoundaryKind::kNeumann}};
    defaults_ = {{0.3, 1.0}, 20, 1 << 12, 512, 1024};
    validate();
  }

  const FkProfile& profile() const { return profile_; }

  std::vector<MultiIndex> interior_stencil() const override {
    const int t = layout_.t(), x = layout_.x(0);
    return {MultiIndex{}, MultiIndex{t}, MultiIndex{x, x}};
  }
  template <class T>
  T pde(const Ctx<T>& q) const {
    T u = q.u();
    return q.u_t() - q.c[0] * q.u_xx(0) - q.c[1] * u * (1.0 - u);
  }
  template <class T>
  T g(int, double, std::span<const double>, std::span<const T>) const {
    return T(0.0);
  }
  template <class T>
  T u0(std::span<const double> x, std::span<const T>) const {
    return T(profile_(x[0]));
  }

 private:
  FkProfile profile_;
};

/// Graph Fisher-Kolmogorov dc/dt = -D L c + alpha c (1 - c) on a synthetic
/// connectome; one network output per node, encoding (D, alpha).
class FkGraph : public Problem {
 public:
  FkGraph(int nodes, std::uint64_t graph_seed, double T = 5.0, int seed_nodes = 3, double seed_value = 0.2)
      : graph_(make_synthetic_connectome(nodes, graph_seed)), c0_(Eigen::VectorXd::Zero(nodes)) {
    name_ = "fk-graph";
    layout_ = {true, 0, 2};
    dim_u_ = nodes;
    t0_ = 0.0;
    t1_ = T;
    c_names_ = {"D", "alpha"};
    c_lo_ = {0.05, 0.5};
    c_hi_ = {0.5, 1.5};
    defaults_ = {{0.3, 1.0}, 20, 1 << 11, 0, 512};
    Rng rng(graph_seed ^ 0x5eedULL);
    for (int i = 0; i < seed_nodes && i < nodes; ++i) c0_[static_cast<Eigen::Index>(rng.below(nodes))] = seed_value;
    validate();
  }

  const GraphModel& graph() const { return graph_; }
  const Eigen::VectorXd& initial_state() const { return c0_; }

  std::vector<MultiIndex> interior_stencil() const override { return {MultiIndex{}, MultiIndex{layout_.t()}}; }
  RS interior(const Ctx<RS>& q, int i) const override {
    const auto& L = graph_.laplacian();
    RS lc = L(i, i) * q.u({}, i);
    for (int j : graph_.neighbors(i)) lc = lc + L(i, j) * q.u({}, j);
    RS u = q.u({}, i);
    return q.u_t(i) + q.c[0] * lc - q.c[1] * u * (1.0 - u);
  }
  RS boundary_value(int, double, std::span<const double>, std::span<const RS>, int) const override {
    throw UnsupportedError("fk-graph has no boundary faces");
  }
  RS initial_value(std::span<const double>, std::span<const RS>, int comp) const override { return RS(c0_[comp]); }
  using Problem::boundary_value;
  using Problem::initial_value;

 private:
  GraphModel graph_;
  Eigen::VectorXd c0_;
};

// ---------------------------------------------------------------------------
// Registry

struct RegistryEntry {
  std::string name;
  std::string description;
};

inline const std::vector<RegistryEntry>& problem_names() {
  static const std::vector<RegistryEntry> names = {
      {"diffusion1d", "1D diffusion, two-Gaussian initial data, encoding (sigma, mu)"},
      {"wave2d", "2D wave on the unit square, encoding (c, k)"},
      {"poisson2d", "2D Poisson on [0, pi]^2, encoding (a, b)"},
      {"diffreact-nd", "d-dimensional diffusion-reaction (d = 2, 5, 8), encoding (D, lambda)"},
      {"burgers1d", "1D viscous Burgers, encoding nu"},
      {"diffusion-negD", "1D diffusion with negative diffusivity D = -0.002"},
      {"fk-continuous", "continuum Fisher-Kolmogorov on [0, 1], encoding (D, alpha)"},
      {"fk-graph", "Fisher-Kolmogorov on a synthetic 83-node connectome, encoding (D, alpha)"},
  };
  return names;
}

namespace detail {

class OptionReader {
 public:
  OptionReader(const std::string& problem, const ProblemOptions& opts) : problem_(problem), opts_(opts) {}
  double get(const std::string& key, double fallback) {
    used_.push_back(key);
    auto it = opts_.find(key);
    return it == opts_.end() ? fallback : it->second;
  }
  void finish() const {
    for (const auto& [k, v] : opts_) {
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) {
        throw ConfigError("problem '" + problem_ + "' has no option '" + k + "'");
      }
    }
  }

 private:
  std::string problem_;
  const ProblemOptions& opts_;
  std::vector<std::string> used_;
};

}  // namespace detail

/// Builds a problem by registry name with optional overrides.
inline ProblemPtr make_problem(const std::string& name, const ProblemOptions& opts = {}) {
  detail::OptionReader o(name, opts);
  ProblemPtr p;
  if (name == "diffusion1d") {
    const double D = o.get("D", 1.0);
    p = std::make_shared<Diffusion1D>("diffusion1d", D, o.get("t0", 0.1), o.get("t1", 1.1), o.get("sigma1", 1.0),
                                      o.get("mu1", 5.0));
  } else if (name == "diffusion-negD") {
    p = std::make_shared<Diffusion1D>("diffusion-negD", o.get("D", -0.002), o.get("t0", 0.1), o.get("t1", 1.1),
                                      o.get("sigma1", 1.0), o.get("mu1", 5.0));
  } else if (name == "wave2d") {
    p = std::make_shared<Wave2D>();
  } else if (name == "poisson2d") {
    p = std::make_shared<Poisson2D>();
  } else if (name.rfind("diffreact-", 0) == 0) {
    int d = 2;
    if (name == "diffreact-nd") {
      d = static_cast<int>(o.get("d", 2));
    } else if (name == "diffreact-2d" || name == "diffreact-5d" || name == "diffreact-8d") {
      d = name[10] - '0';
    } else {
      throw ConfigError("unknown problem '" + name + "'");
    }
    if (d != 2 && d != 5 && d != 8 && opts.count("d") == 0) throw ConfigError("diffreact-nd: d must be 2, 5 or 8");
    p = std::make_shared<DiffReactND>(d, o.get("sigma", 0.1));
  } else if (name == "burgers1d") {
    p = std::make_shared<Burgers1D>();
  } else if (name == "fk-continuous") {
    FkProfile prof{o.get("amplitude", 0.5), o.get("center", 0.5), o.get("width", 0.1)};
    p = std::make_shared<FkContinuous>(o.get("T", 1.0), prof);
  } else if (name == "fk-graph") {
    p = std::make_shared<FkGraph>(static_cast<int>(o.get("nodes", 83)), static_cast<std::uint64_t>(o.get("graph_seed", 2024)),
                                  o.get("T", 5.0), static_cast<int>(o.get("seed_nodes", 3)), o.get("seed_value", 0.2));
  } else {
    throw ConfigError("unknown problem '" + name + "'");
  }
  o.finish();
  return p;
}

/// All registered problems with their default configurations.
inline std::vector<ProblemPtr> list_problems() {
  std::vector<ProblemPtr> out;
  for (const auto& e : problem_names()) out.push_back(make_problem(e.name));
  return out;
}

}  // namespace cdpinn
