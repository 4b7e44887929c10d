#pragma once

// Adam, L-BFGS with a strong-Wolfe line search, and the two-phase
// full-batch training loop.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/losses.hpp"
#include "cdpinn/network.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/sampling.hpp"

namespace cdpinn {

// --- Adam ------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

inline void adam_step(Eigen::VectorXd& w, const Eigen::VectorXd& grad, AdamState& st, const AdamConfig& cfg) {
  if (st.m.size() != w.size() || st.v.size() != w.size() || grad.size() != w.size()) {
    throw ShapeError("Adam state does not match the parameter vector");
  }
  if (!grad.allFinite()) throw DivergenceError("non-finite gradient in Adam step " + std::to_string(st.step + 1));
  ++st.step;
  st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * grad;
  st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  w.array() -= cfg.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + cfg.eps);
}

// --- L-BFGS ----------------------------------------------------------------

struct LbfgsConfig {
  int max_steps = 100;
  int history = 20;
  double c1 = 1e-4;
  double c2 = 0.9;
  double grad_tol = 1e-9;
  int max_line_search = 25;

  void validate() const {
    if (max_steps < 0) throw ConfigError("lbfgs steps must be >= 0");
    if (history < 1) throw ConfigError("lbfgs history must be >= 1");
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw ConfigError("Wolfe constants need 0 < c1 < c2 < 1");
  }
};

enum class LbfgsStatus { kConverged, kMaxSteps, kLineSearchFailed };

inline const char* status_name(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::kConverged: return "converged";
    case LbfgsStatus::kMaxSteps: return "max-steps";
    case LbfgsStatus::kLineSearchFailed: return "line-search-failed";
  }
  return "?";
}

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd g;
  int steps = 0;
  int evaluations = 0;
  std::vector<double> trace;  // objective at the start and after each accepted step
  LbfgsStatus status = LbfgsStatus::kMaxSteps;
};

/// f(x, grad) -> value; fills grad.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using StepCallback = std::function<void(int step, double f, const Eigen::VectorXd& x)>;

namespace detail {

/// Minimizer of the cubic through (a, fa, da), (b, fb, db), clamped to the
/// interior of [min(a,b), max(a,b)]; bisection when it is not defined.
inline double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0 && std::isfinite(fa) && std::isfinite(fb)) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double cand = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if (std::isfinite(cand)) t = cand;
  }
  const double margin = 0.1 * (hi - lo);
  return std::clamp(t, lo + margin, hi - margin);
}

struct LinePoint {
  double a = 0.0, f = 0.0, d = 0.0;
  Eigen::VectorXd g;
};

/// Strong-Wolfe line search (bracketing + zoom). Returns the accepted point
/// or the best sufficient-decrease point seen; nullopt when none decreased f.
inline std::optional<LinePoint> wolfe_search(const Objective& fn, const Eigen::VectorXd& x, double f0,
                                             double d0, const Eigen::VectorXd& dir, double a_init,
                                             const LbfgsConfig& cfg, int& evals) {
  Eigen::VectorXd g(x.size());
  auto eval = [&](double a) {
    LinePoint p;
    p.a = a;
    p.f = fn(x + a * dir, g);
    ++evals;
    p.d = std::isfinite(p.f) ? g.dot(dir) : NAN;
    p.g = g;
    return p;
  };
  std::optional<LinePoint> best;
  auto consider = [&](const LinePoint& p) {
    if (std::isfinite(p.f) && p.f < f0 && p.f <= f0 + cfg.c1 * p.a * d0 && (!best || p.f < best->f)) best = p;
  };
  auto zoom = [&](LinePoint lo, LinePoint hi, int budget) -> std::optional<LinePoint> {
    for (int i = 0; i < budget; ++i) {
      double a;
      if (std::isfinite(hi.f) && std::isfinite(hi.d)) {
        a = cubic_min(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d);
      } else {
        a = 0.5 * (lo.a + hi.a);
      }
      LinePoint p = eval(a);
      consider(p);
      if (!std::isfinite(p.f) || p.f > f0 + cfg.c1 * a * d0 || p.f >= lo.f) {
        hi = p;
      } else {
        if (std::abs(p.d) <= -cfg.c2 * d0) return p;
        if (p.d * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = p;
      }
      if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, std::abs(lo.a))) break;
    }
    return std::nullopt;
  };

  LinePoint prev{0.0, f0, d0, {}};
  double a = a_init;
  for (int i = 0; i < cfg.max_line_search; ++i) {
    LinePoint p = eval(a);
    consider(p);
    const int left = cfg.max_line_search - i - 1;
    if (!std::isfinite(p.f) || p.f > f0 + cfg.c1 * a * d0 || (i > 0 && p.f >= prev.f)) {
      if (auto r = zoom(prev, p, left)) return r;
      return best;
    }
    if (std::abs(p.d) <= -cfg.c2 * d0) return p;
    if (p.d >= 0.0) {
      if (auto r = zoom(p, prev, left)) return r;
      return best;
    }
    prev = p;
    a *= 2.0;
  }
  return best;
}

}  // namespace detail

inline LbfgsResult lbfgs_run(Eigen::VectorXd x0, const Objective& fn, const LbfgsConfig& cfg,
                             const StepCallback& on_step = {}) {
  cfg.validate();
  LbfgsResult r;
  r.x = std::move(x0);
  r.g.resize(r.x.size());
  r.f = fn(r.x, r.g);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !r.g.allFinite()) throw DivergenceError("non-finite objective at L-BFGS start");
  r.trace.push_back(r.f);

  std::vector<Eigen::VectorXd> S, Y;
  std::vector<double> rho;
  for (int it = 0; it < cfg.max_steps; ++it) {
    if (r.g.norm() < cfg.grad_tol) {
      r.status = LbfgsStatus::kConverged;
      return r;
    }
    // Two-loop recursion.
    Eigen::VectorXd q = r.g;
    const int m = static_cast<int>(S.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    double gamma = 1.0;
    if (m > 0) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
    Eigen::VectorXd dir = gamma * q;
    for (int i = 0; i < m; ++i) {
      const double beta = rho[i] * Y[i].dot(dir);
      dir += (alpha[i] - beta) * S[i];
    }
    dir = -dir;
    double d0 = r.g.dot(dir);
    if (!(d0 < 0.0)) {
      S.clear(), Y.clear(), rho.clear();
      dir = -r.g;
      d0 = -r.g.squaredNorm();
    }
    const double a_init = m == 0 ? std::min(1.0, 1.0 / r.g.lpNorm<Eigen::Infinity>()) : 1.0;
    auto p = detail::wolfe_search(fn, r.x, r.f, d0, dir, a_init, cfg, r.evaluations);
    if (!p) {
      r.status = LbfgsStatus::kLineSearchFailed;
      return r;
    }
    Eigen::VectorXd s = p->a * dir;
    Eigen::VectorXd y = p->g - r.g;
    r.x += s;
    r.f = p->f;
    r.g = p->g;
    ++r.steps;
    r.trace.push_back(r.f);
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(S.size()) == cfg.history) {
        S.erase(S.begin()), Y.erase(Y.begin()), rho.erase(rho.begin());
      }
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
    }
    if (on_step) on_step(r.steps, r.f, r.x);
  }
  r.status = r.g.norm() < cfg.grad_tol ? LbfgsStatus::kConverged : LbfgsStatus::kMaxSteps;
  return r;
}

// --- training loop ---------------------------------------------------------

struct TrainConfig {
  int adam_steps = 800;
  AdamConfig adam;
  int lbfgs_steps = 200;
  LbfgsConfig lbfgs;
  int log_interval = 100;
  bool log_wall_time = false;
  bool record_cd = true;  // evaluate L_cd at log epochs even when unweighted
  int chunk = 128;

  void validate() const {
    if (adam_steps < 0 || lbfgs_steps < 0) throw ConfigError("step counts must be >= 0");
    if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (log_interval < 1) throw ConfigError("log interval must be >= 1");
    lbfgs.validate();
  }

  /// Splits a total epoch budget 80/20 between the phases.
  static TrainConfig with_epochs(int epochs) {
    TrainConfig c;
    c.adam_steps = static_cast<int>(std::lround(0.8 * epochs));
    c.lbfgs_steps = epochs - c.adam_steps;
    return c;
  }
};

struct TestSet {
  Eigen::MatrixXd Z;  // inputs
  Eigen::MatrixXd U;  // truth, dim_u x n
  int size() const { return static_cast<int>(Z.cols()); }
};

struct TrainRecord {
  int epoch = 0;
  LossBreakdown loss;
  std::optional<double> test_mse;
  double seconds = 0.0;
};

struct TrainResult {
  NetworkWeights net;
  std::vector<TrainRecord> log;
  bool diverged = false;
  std::string message;
  double train_seconds = 0.0;
  LbfgsStatus lbfgs_status = LbfgsStatus::kMaxSteps;
  int lbfgs_steps = 0;
};

inline double test_mse(const NetworkWeights& net, const TestSet& test) {
  if (test.size() == 0) throw ConfigError("empty test set");
  return (eval_batch(net, test.Z) - test.U).squaredNorm() / static_cast<double>(test.U.size());
}

/// Network with Glorot weights and inputs normalized to the problem box.
inline NetworkWeights make_network(const Problem& pb, const ArchitectureConfig& arch) {
  NetworkWeights net = init_network(arch, pb.layout().input_dim(), pb.dim_u());
  net.normalize_to_box(pb.input_lo(), pb.input_hi());
  return net;
}

/// Adam phase then L-BFGS phase, both full batch, starting from `net`.
inline TrainResult train(NetworkWeights net, const Problem& pb, const TrainingSet& ts, const LossWeights& w,
                         const TrainConfig& cfg, const TestSet* test = nullptr) {
  cfg.validate();
  w.validate();
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t_start).count(); };

  TrainResult res;
  LossOptions opt;
  opt.chunk = cfg.chunk;
  const int total_epochs = cfg.adam_steps + cfg.lbfgs_steps;

  auto record = [&](int epoch, const NetworkWeights& at, LossBreakdown b) {
    if (w.cd == 0.0 && cfg.record_cd && !b.cd_evaluated) {
      LossOptions diag = opt;
      diag.grad = false;
      diag.cd_when_unweighted = true;
      auto d = total_loss(at, pb, ts, w, diag).breakdown;
      b.cd_interior = d.cd_interior, b.cd_boundary = d.cd_boundary, b.cd_initial = d.cd_initial;
      b.cd_evaluated = true;
      b.finish();
    }
    TrainRecord r;
    r.epoch = epoch;
    r.loss = b;
    if (test) r.test_mse = test_mse(at, *test);
    r.seconds = cfg.log_wall_time ? elapsed() : 0.0;
    res.log.push_back(r);
  };
  auto due = [&](int epoch) { return epoch % cfg.log_interval == 0 || epoch == total_epochs; };

  // Adam: epoch e evaluates the loss at the weights after e updates.
  AdamState st(net.param_count());
  Eigen::VectorXd last_good = net.params();
  for (int e = 0; e < cfg.adam_steps; ++e) {
    LossResult L = total_loss(net, pb, ts, w, opt);
    if (!std::isfinite(L.breakdown.total) || !L.grad.allFinite()) {
      net.set_params(last_good);
      res.diverged = true;
      res.message = "non-finite loss at Adam epoch " + std::to_string(e);
      res.net = std::move(net);
      res.train_seconds = elapsed();
      return res;
    }
    if (due(e)) record(e, net, L.breakdown);
    last_good = net.params();
    adam_step(net.params(), L.grad, st, cfg.adam);
  }

  if (cfg.lbfgs_steps == 0) {
    if (due(total_epochs) && (res.log.empty() || res.log.back().epoch != total_epochs)) {
      LossOptions o = opt;
      o.grad = false;
      record(total_epochs, net, total_loss(net, pb, ts, w, o).breakdown);
    }
    res.net = std::move(net);
    res.train_seconds = elapsed();
    return res;
  }

  NetworkWeights probe = net;
  LossBreakdown last_b;
  Eigen::VectorXd last_x;
  Objective fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    probe.set_params(x);
    LossResult L = total_loss(probe, pb, ts, w, opt);
    g = L.grad;
    last_b = L.breakdown;
    last_x = x;
    return L.breakdown.total;
  };
  auto breakdown_at = [&](const Eigen::VectorXd& x) {
    if (x == last_x) return last_b;
    Eigen::VectorXd g;
    fn(x, g);
    return last_b;
  };
  const int e0 = cfg.adam_steps;
  LbfgsConfig lc = cfg.lbfgs;
  lc.max_steps = cfg.lbfgs_steps;
  try {
    Eigen::VectorXd x0 = net.params();
    auto on_step = [&](int step, double, const Eigen::VectorXd& x) {
      const int epoch = e0 + step;
      if (due(epoch)) {
        NetworkWeights at = net;
        at.set_params(x);
        record(epoch, at, breakdown_at(x));
      }
    };
    // Record the starting point of the phase when it falls on a log epoch.
    if (due(e0) && (res.log.empty() || res.log.back().epoch != e0)) {
      Eigen::VectorXd g;
      fn(x0, g);
      record(e0, net, last_b);
    }
    LbfgsResult lr = lbfgs_run(x0, fn, lc, on_step);
    net.set_params(lr.x);
    res.lbfgs_status = lr.status;
    res.lbfgs_steps = lr.steps;
    const int final_epoch = e0 + lr.steps;
    if (res.log.empty() || res.log.back().epoch != final_epoch) record(final_epoch, net, breakdown_at(lr.x));
  } catch (const DivergenceError& e) {
    res.diverged = true;
    res.message = e.what();
  }
  res.net = std::move(net);
  res.train_seconds = elapsed();
  return res;
}

inline TrainResult train(const Problem& pb, const TrainingSet& ts, const LossWeights& w, const ArchitectureConfig& arch,
                         const TrainConfig& cfg, const TestSet* test = nullptr) {
  return train(make_network(pb, arch), pb, ts, w, cfg, test);
}

inline void write_train_log(const std::vector<TrainRecord>& log, std::ostream& os) {
  os << "epoch,total,data,res,cd,test_mse,seconds\n";
  os << std::setprecision(17);
  for (const auto& r : log) {
    os << r.epoch << ',' << r.loss.total << ',' << r.loss.data << ',' << r.loss.res << ',';
    if (r.loss.cd_evaluated) os << r.loss.cd;
    os << ',';
    if (r.test_mse) os << *r.test_mse;
    os << ',' << r.seconds << '\n';
  }
}

}  // namespace cdpinn
