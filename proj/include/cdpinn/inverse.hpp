#pragma once

// Online parameter estimation against a frozen surrogate: minimize the
// mean squared observation misfit over the encoding c with projected Adam,
// using du/dc from first-order jets.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/jet_engine.hpp"
#include "cdpinn/network.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/random.hpp"

namespace cdpinn {

/// Observations (t_i, position_i, value_i). For spatial problems the
/// position is the x coordinate (1D); for graph problems it is the node id.
struct ObservationSet {
  std::vector<double> t;
  std::vector<double> pos;
  std::vector<double> value;
  double noise = 0.0;  // relative noise level the values were generated with

  int size() const { return static_cast<int>(t.size()); }
  void add(double ti, double p, double v) {
    t.push_back(ti);
    pos.push_back(p);
    value.push_back(v);
  }
};

inline void validate_observations(const Problem& pb, const ObservationSet& obs) {
  if (obs.size() == 0) throw DataError("observation set is empty");
  if (!pb.layout().has_time) throw UnsupportedError("observations need a time-dependent problem");
  if (obs.pos.size() != obs.t.size() || obs.value.size() != obs.t.size()) throw DataError("observation columns differ in length");
  const bool graph = pb.layout().dim_x == 0;
  if (!graph && pb.layout().dim_x != 1) throw UnsupportedError("observations support 1D space or graph problems only");
  for (int i = 0; i < obs.size(); ++i) {
    if (!std::isfinite(obs.t[i]) || !std::isfinite(obs.pos[i]) || !std::isfinite(obs.value[i])) {
      throw DataError("non-finite observation in row " + std::to_string(i + 1));
    }
    if (obs.t[i] < pb.t0() || obs.t[i] > pb.t1()) {
      throw DataError("observation time " + std::to_string(obs.t[i]) + " outside the trained interval");
    }
    if (graph) {
      const double n = obs.pos[i];
      if (n != std::floor(n) || n < 0 || n >= pb.dim_u()) throw DataError("observation node id out of range");
    }
  }
}

inline ObservationSet read_observations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open observations '" + path + "'");
  ObservationSet obs;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_of("0123456789") != 0 && line[0] != '-' && line[0] != '.') continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',')) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected t,position,value");
    }
    try {
      obs.add(std::stod(a), std::stod(b), std::stod(c));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return obs;
}

inline void write_observations(const ObservationSet& obs, std::ostream& os) {
  os << "t,position,value\n" << std::setprecision(17);
  for (int i = 0; i < obs.size(); ++i) os << obs.t[i] << ',' << obs.pos[i] << ',' << obs.value[i] << '\n';
}

struct InverseConfig {
  double lr = 1e-2;
  int max_steps = 2000;
  int starts = 5;
  std::uint64_t seed = 0;
  double tol = 1e-14;  // stop when the step-size multiplier falls below this
};

struct StartResult {
  std::vector<double> init;
  std::vector<double> c;
  double objective = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

struct EstimationResult {
  std::vector<double> c;
  double objective = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  int best_start = 0;
  std::vector<StartResult> starts;
};

/// Misfit (1/N) sum |u(t_i, x_i; c) - obs_i|^2 and its gradient in c.
class Misfit {
 public:
  Misfit(const NetworkWeights& net, const Problem& pb, const ObservationSet& obs) : net_(net), pb_(pb), obs_(obs) {
    validate_observations(pb, obs);
    const Layout& L = pb.layout();
    if (net.in_dim() != L.input_dim() || net.out_dim() != pb.dim_u()) {
      throw ShapeError("frozen network does not match the input schema of problem '" + pb.name() + "'");
    }
    std::vector<MultiIndex> pats;
    std::vector<int> tracked;
    for (int k = 0; k < L.dim_c; ++k) {
      pats.push_back(MultiIndex{L.c(k)});
      tracked.push_back(L.c(k));
    }
    set_ = make_index_set(tracked, std::span<const MultiIndex>(pats));
    Z_.resize(L.input_dim(), obs.size());
    for (int i = 0; i < obs.size(); ++i) {
      Z_(L.t(), i) = obs.t[i];
      if (L.dim_x == 1) Z_(L.x(0), i) = obs.pos[i];
      comp_.push_back(L.dim_x == 0 ? static_cast<int>(obs.pos[i]) : 0);
    }
  }

  double operator()(std::span<const double> c, std::vector<double>* grad = nullptr) const {
    const Layout& L = pb_.layout();
    Eigen::MatrixXd Z = Z_;
    for (int k = 0; k < L.dim_c; ++k) Z.row(L.c(k)).setConstant(c[k]);
    const JetBatch J = jet_forward(net_, Z, set_).first;
    const int N = obs_.size();
    double f = 0.0;
    if (grad) grad->assign(L.dim_c, 0.0);
    for (int i = 0; i < N; ++i) {
      const double r = J(comp_[i], 0, i) - obs_.value[i];
      f += r * r;
      if (grad) {
        for (int k = 0; k < L.dim_c; ++k) (*grad)[k] += 2.0 * r * J(comp_[i], 1 + k, i) / N;
      }
    }
    return f / N;
  }

 private:
  const NetworkWeights& net_;
  const Problem& pb_;
  const ObservationSet& obs_;
  IndexSetPtr set_;
  Eigen::MatrixXd Z_;
  std::vector<int> comp_;
};

namespace detail {

/// Projected Adam with step acceptance: a step that increases the misfit is
/// rejected, the step multiplier halved and the moments restarted, so the
/// trace never increases. Accepted steps let the multiplier grow back to 1.
inline StartResult projected_adam(const Misfit& fn, std::vector<double> c, const std::vector<double>& lo,
                                  const std::vector<double>& hi, const InverseConfig& cfg) {
  const int m = static_cast<int>(c.size());
  StartResult r;
  r.init = c;
  std::vector<double> g, mom(m, 0.0), vel(m, 0.0), trial(m);
  double f = fn(c, &g);
  if (!std::isfinite(f)) {
    r.diverged = true;
    r.c = c;
    r.objective = f;
    return r;
  }
  r.trace.push_back(f);
  double scale = 1.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;
  for (int it = 0; it < cfg.max_steps; ++it) {
    ++t;
    for (int k = 0; k < m; ++k) {
      mom[k] = b1 * mom[k] + (1 - b1) * g[k];
      vel[k] = b2 * vel[k] + (1 - b2) * g[k] * g[k];
    }
    for (;;) {
      const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t)), bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
      for (int k = 0; k < m; ++k) {
        const double step = cfg.lr * scale * (mom[k] / bc1) / (std::sqrt(vel[k] / bc2) + eps);
        trial[k] = std::clamp(c[k] - step, lo[k], hi[k]);
      }
      std::vector<double> gt;
      const double ft = fn(trial, &gt);
      if (std::isfinite(ft) && ft <= f) {
        c = trial;
        f = ft;
        g = gt;
        r.trace.push_back(f);
        ++r.iterations;
        scale = std::min(1.0, 2.0 * scale);
        break;
      }
      scale *= 0.5;
      if (scale < cfg.tol) break;
      t = 1;
      for (int k = 0; k < m; ++k) {
        mom[k] = (1 - b1) * g[k];
        vel[k] = (1 - b2) * g[k] * g[k];
      }
    }
    if (scale < cfg.tol) {
      r.converged = true;
      break;
    }
  }
  r.c = c;
  r.objective = f;
  return r;
}

}  // namespace detail

/// Multi-start estimate; start 0 is `init_c`, the others are drawn
/// uniformly in the bounds from cfg.seed. The network is only read.
inline EstimationResult estimate(const NetworkWeights& frozen, const Problem& pb, const ObservationSet& obs,
                                 std::span<const double> init_c, const std::vector<double>& lo,
                                 const std::vector<double>& hi, const InverseConfig& cfg = {}) {
  const int m = pb.layout().dim_c;
  if (static_cast<int>(init_c.size()) != m || static_cast<int>(lo.size()) != m || static_cast<int>(hi.size()) != m) {
    throw ShapeError("encoding dimension mismatch in estimate()");
  }
  for (int k = 0; k < m; ++k) {
    if (!(lo[k] < hi[k])) throw ConfigError("empty bound interval for " + pb.c_names()[k]);
    if (init_c[k] < lo[k] || init_c[k] > hi[k]) throw ConfigError("initial encoding outside the bounds");
  }
  if (cfg.starts < 1) throw ConfigError("need at least one start");
  Misfit fn(frozen, pb, obs);
  Rng rng(cfg.seed);
  EstimationResult out;
  for (int s = 0; s < cfg.starts; ++s) {
    std::vector<double> c0(init_c.begin(), init_c.end());
    if (s > 0) {
      for (int k = 0; k < m; ++k) c0[k] = rng.uniform(lo[k], hi[k]);
    }
    out.starts.push_back(detail::projected_adam(fn, c0, lo, hi, cfg));
  }
  int best = -1;
  for (int s = 0; s < cfg.starts; ++s) {
    const auto& r = out.starts[s];
    if (r.diverged || !std::isfinite(r.objective)) continue;
    if (best < 0 || r.objective < out.starts[best].objective) best = s;
  }
  if (best < 0) throw EstimationError("all starts diverged");
  const auto& b = out.starts[best];
  out.best_start = best;
  out.c = b.c;
  out.objective = b.objective;
  out.trace = b.trace;
  out.iterations = b.iterations;
  out.converged = b.converged;
  return out;
}

/// Misfit on the Cartesian grid axis0 x axis1 (row-major: axis0 slowest).
inline Eigen::MatrixXd loss_landscape(const NetworkWeights& frozen, const Problem& pb, const ObservationSet& obs,
                                      const std::vector<double>& axis0, const std::vector<double>& axis1) {
  if (pb.layout().dim_c != 2) throw UnsupportedError("loss landscape needs a two-component encoding");
  for (double v : axis0) {
    if (v < pb.c_lo()[0] || v > pb.c_hi()[0]) throw ConfigError("landscape grid outside encoding range");
  }
  for (double v : axis1) {
    if (v < pb.c_lo()[1] || v > pb.c_hi()[1]) throw ConfigError("landscape grid outside encoding range");
  }
  Misfit fn(frozen, pb, obs);
  Eigen::MatrixXd out(axis0.size(), axis1.size());
  for (size_t i = 0; i < axis0.size(); ++i) {
    for (size_t j = 0; j < axis1.size(); ++j) {
      const double c[2] = {axis0[i], axis1[j]};
      out(i, j) = fn(c);
    }
  }
  return out;
}

inline void write_landscape_csv(const Problem& pb, const std::vector<double>& axis0, const std::vector<double>& axis1,
                                const Eigen::MatrixXd& L, std::ostream& os) {
  os << pb.c_names()[0] << ',' << pb.c_names()[1] << ",misfit\n" << std::setprecision(17);
  for (size_t i = 0; i < axis0.size(); ++i) {
    for (size_t j = 0; j < axis1.size(); ++j) os << axis0[i] << ',' << axis1[j] << ',' << L(i, j) << '\n';
  }
}

inline void write_estimate(const Problem& pb, const EstimationResult& r, std::ostream& os) {
  os << std::setprecision(17);
  os << "[estimate]\n";
  for (int k = 0; k < pb.layout().dim_c; ++k) os << pb.c_names()[k] << " = " << r.c[k] << '\n';
  os << "objective = " << r.objective << "\niterations = " << r.iterations
     << "\nconverged = " << (r.converged ? "true" : "false") << "\nbest_start = " << r.best_start << "\n";
  for (size_t s = 0; s < r.starts.size(); ++s) {
    const auto& st = r.starts[s];
    os << "\n[start." << s << "]\n";
    for (int k = 0; k < pb.layout().dim_c; ++k) {
      os << "init_" << pb.c_names()[k] << " = " << st.init[k] << '\n';
      os << pb.c_names()[k] << " = " << st.c[k] << '\n';
    }
    os << "objective = " << st.objective << "\niterations = " << st.iterations
       << "\nconverged = " << (st.converged ? "true" : "false") << '\n';
  }
  os << "\n[trace]\n";
  for (size_t i = 0; i < r.trace.size(); ++i) os << i << " = " << r.trace[i] << '\n';
}

}  // namespace cdpinn
