#pragma once

// Orchestration: truth grids, prediction on grids, heatmaps, labeled data
// assembly, full experiment runs with an artifact manifest, and the
// solver-vs-network timing sweep.

#include <zlib.h>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cdpinn/config.hpp"
#include "cdpinn/errors.hpp"
#include "cdpinn/inverse.hpp"
#include "cdpinn/jet_engine.hpp"
#include "cdpinn/losses.hpp"
#include "cdpinn/metrics.hpp"
#include "cdpinn/network.hpp"
#include "cdpinn/optim.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/random.hpp"
#include "cdpinn/sampling.hpp"
#include "cdpinn/solution_grid.hpp"
#include "cdpinn/solvers.hpp"

namespace cdpinn {

namespace fs = std::filesystem;

/// Keeps every `rt`-th time slice and every `rx`-th node of a 1D grid.
inline SolutionGrid subsample(const SolutionGrid& g, int rt, int rx) {
  std::vector<double> t;
  for (size_t i = 0; i < g.t().size(); i += rt) t.push_back(g.t()[i]);
  std::vector<std::vector<double>> axes;
  std::vector<size_t> keep;
  if (g.space_dims() == 1) {
    std::vector<double> x;
    for (size_t i = 0; i < g.x(0).size(); i += rx) {
      x.push_back(g.x(0)[i]);
      keep.push_back(i);
    }
    axes.push_back(x);
  } else if (g.space_dims() == 0) {
    keep.push_back(0);
  } else {
    throw UnsupportedError("subsample: only 0 or 1 space axes");
  }
  SolutionGrid out(t, axes, g.components(), g.provenance());
  out.params() = g.params();
  for (size_t it = 0; it < t.size(); ++it) {
    for (size_t s = 0; s < keep.size(); ++s) {
      for (int c = 0; c < g.components(); ++c) out(it, s, c) = g(it * rt, keep[s], c);
    }
  }
  return out;
}

/// Reference solution of `pb` at encoding `c` on an nt x nx^d grid: closed
/// form when available, otherwise the problem's oracle solver run at
/// `refine` times the resolution and subsampled.
inline SolutionGrid truth_grid(const Problem& pb, std::span<const double> c, int nt, int nx, int refine = 4) {
  check_encoding(pb, c);
  if (nt < 1 || nx < 1 || refine < 1) throw ConfigError("truth grid: sizes must be >= 1");
  const Layout& L = pb.layout();
  if (pb.has_exact()) {
    std::vector<double> t = L.has_time ? linspace(pb.t0(), pb.t1(), nt) : std::vector<double>{0.0};
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < L.dim_x; ++i) axes.push_back(linspace(pb.x_lo()[i], pb.x_hi()[i], nx));
    return analytic_grid(pb, c, t, axes);
  }
  const int ntf = (nt - 1) * refine + 1, nxf = (nx - 1) * refine + 1;
  if (pb.name() == "burgers1d") {
    return subsample(burgers_newton_implicit(c[0], nxf, ntf, 1e-10, 50, pb.t1()), refine, refine);
  }
  if (pb.name() == "fk-continuous") {
    const auto& fk = dynamic_cast<const FkContinuous&>(pb);
    const FkProfile prof = fk.profile();
    return subsample(fk_continuum_cn(c[0], c[1], nxf, ntf, [&](double x) { return prof(x); }, pb.t1()), refine, refine);
  }
  if (pb.name() == "fk-graph") {
    const auto& fg = dynamic_cast<const FkGraph&>(pb);
    if (nt < 2) throw ConfigError("truth grid: fk-graph needs nt >= 2");
    const double dt = pb.t1() / static_cast<double>(ntf - 1);
    return fk_graph_rk4(fg.graph(), fg.initial_state(), c[0], c[1], dt, pb.t1(), refine);
  }
  throw DataError("problem '" + pb.name() + "' has no truth source");
}

/// Network inputs for every node of `g` at encoding `c`, in grid order.
inline Eigen::MatrixXd grid_inputs(const Problem& pb, std::span<const double> c, const SolutionGrid& g) {
  const Layout& L = pb.layout();
  if (g.space_dims() != L.dim_x) throw ShapeError("grid space dimension does not match the problem");
  Eigen::MatrixXd Z(L.input_dim(), static_cast<Eigen::Index>(g.node_count()));
  const size_t S = g.space_nodes();
  for (size_t it = 0; it < g.t().size(); ++it) {
    for (size_t s = 0; s < S; ++s) {
      const auto col = static_cast<Eigen::Index>(it * S + s);
      if (L.has_time) Z(L.t(), col) = g.t()[it];
      const auto x = g.space_coords(s);
      for (int i = 0; i < L.dim_x; ++i) Z(L.x(i), col) = x[i];
      for (int k = 0; k < L.dim_c; ++k) Z(L.c(k), col) = c[k];
    }
  }
  return Z;
}

/// Network prediction laid out like g.values().
inline Eigen::ArrayXd predict_grid(const NetworkWeights& net, const Problem& pb, std::span<const double> c,
                                   const SolutionGrid& g, int chunk = 8192) {
  if (g.components() != pb.dim_u()) throw ShapeError("grid component count does not match the problem");
  const Eigen::MatrixXd Z = grid_inputs(pb, c, g);
  Eigen::ArrayXd out(Z.cols() * pb.dim_u());
  for (Eigen::Index j0 = 0; j0 < Z.cols(); j0 += chunk) {
    const Eigen::Index n = std::min<Eigen::Index>(chunk, Z.cols() - j0);
    const Eigen::MatrixXd U = eval_batch(net, Z.middleCols(j0, n));
    out.segment(j0 * pb.dim_u(), n * pb.dim_u()) = Eigen::Map<const Eigen::ArrayXd>(U.data(), U.size());
  }
  return out;
}

inline Eigen::Map<const Eigen::ArrayXd> grid_values(const SolutionGrid& g) {
  return {g.values().data(), static_cast<Eigen::Index>(g.values().size())};
}

inline std::string grid_descriptor(const SolutionGrid& g) {
  std::ostringstream o;
  o << g.provenance() << ' ' << g.t().size();
  for (int a = 0; a < g.space_dims(); ++a) o << 'x' << g.x(a).size();
  if (g.components() > 1) o << " (" << g.components() << " components)";
  return o.str();
}

// --- heatmap ---------------------------------------------------------------

struct HeatmapCell {
  std::vector<double> c;
  double nlmae = 0.0;
  double nrmse = 0.0;  // NaN when the truth grid has zero norm
  long points = 0;
  double sq_err = 0.0, abs_err = 0.0, sq_truth = 0.0;
};

struct HeatmapResult {
  std::vector<std::string> axes;
  std::vector<HeatmapCell> cells;
  MetricReport pooled;  // all cells' points concatenated
};

inline std::vector<std::vector<double>> heatmap_encodings(const Problem& pb, const TestGridSpec& spec) {
  if (!spec.enabled()) throw ConfigError("[test] no heatmap axes configured");
  std::vector<std::vector<double>> out;
  const auto& a0 = spec.axes[0];
  const auto v0 = linspace(a0.lo, a0.hi, a0.steps);
  std::vector<double> v1{0.0};
  if (spec.axes.size() > 1) v1 = linspace(spec.axes[1].lo, spec.axes[1].hi, spec.axes[1].steps);
  for (double p : v0) {
    for (double q : v1) {
      std::vector<double> c = spec.fixed_c;
      c[pb.encoding_index(a0.name)] = p;
      if (spec.axes.size() > 1) c[pb.encoding_index(spec.axes[1].name)] = q;
      out.push_back(c);
    }
  }
  return out;
}

inline HeatmapCell heatmap_cell(const NetworkWeights& net, const Problem& pb, const std::vector<double>& c,
                                const TestGridSpec& spec) {
  const SolutionGrid g = truth_grid(pb, c, spec.nt, spec.nx, spec.refine);
  const Eigen::ArrayXd pred = predict_grid(net, pb, c, g);
  const auto truth = grid_values(g);
  HeatmapCell cell;
  cell.c = c;
  cell.nlmae = nlmae(pred, truth);
  try {
    cell.nrmse = nrmse(pred, truth);
  } catch (const MetricError&) {
    cell.nrmse = std::numeric_limits<double>::quiet_NaN();
  }
  cell.points = static_cast<long>(pred.size());
  cell.sq_err = (pred - truth).square().sum();
  cell.abs_err = (pred - truth).abs().sum();
  cell.sq_truth = truth.square().sum();
  return cell;
}

/// Per-cell metrics over the configured encoding axes. Cells run on
/// `threads` workers; results do not depend on the thread count.
inline HeatmapResult heatmap(const NetworkWeights& net, const Problem& pb, const TestGridSpec& spec, int threads = 1) {
  const auto encs = heatmap_encodings(pb, spec);
  HeatmapResult r;
  for (const auto& a : spec.axes) r.axes.push_back(a.name);
  r.cells.resize(encs.size());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(encs.size())));
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (size_t i = next++; i < encs.size(); i = next++) {
      try {
        r.cells[i] = heatmap_cell(net, pb, encs[i], spec);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  double se = 0, ae = 0, st = 0;
  long n = 0;
  for (const auto& c : r.cells) se += c.sq_err, ae += c.abs_err, st += c.sq_truth, n += c.points;
  r.pooled.points = n;
  r.pooled.mse = se / n;
  r.pooled.nlmae = ae == 0.0 ? std::numeric_limits<double>::infinity() : -std::log10(ae / n);
  r.pooled.nrmse = st > 0.0 ? std::sqrt(se / st) : std::numeric_limits<double>::quiet_NaN();
  r.pooled.grid = std::to_string(r.cells.size()) + " cells";
  return r;
}

inline void write_heatmap_csv(const Problem& pb, const TestGridSpec& spec, const HeatmapResult& r, std::ostream& os) {
  const std::string c1 = spec.axes[0].name;
  const std::string c2 = spec.axes.size() > 1 ? spec.axes[1].name : "c2";
  const int k1 = pb.encoding_index(c1);
  const int k2 = spec.axes.size() > 1 ? pb.encoding_index(c2) : -1;
  os << c1 << ',' << c2 << ",nlmae,nrmse\n" << std::setprecision(17);
  for (const auto& cell : r.cells) {
    os << cell.c[k1] << ',' << (k2 >= 0 ? cell.c[k2] : 0.0) << ',' << cell.nlmae << ',' << cell.nrmse << '\n';
  }
}

// --- data assembly ---------------------------------------------------------

/// Training set with labeled points at every configured encoding; problems
/// without a closed form take labels from their oracle grid.
inline TrainingSet build_training_set(const Problem& pb, const ExperimentConfig& cfg) {
  SamplingConfig s = cfg.sampling;
  s.n_labeled = 0;
  TrainingSet ts = make_training_set(pb, s);
  for (size_t i = 0; i < cfg.labeled_configs.size(); ++i) {
    const auto& c = cfg.labeled_configs[i];
    std::optional<SolutionGrid> grid;
    if (!pb.has_exact()) grid = truth_grid(pb, c, cfg.truth.nt, cfg.truth.nx, cfg.truth.refine);
    const auto part = sample_labeled(pb, cfg.sampling.n_labeled, c, derive_seed(derive_seed(cfg.sampling.seed, 0), i),
                                     grid ? &*grid : nullptr);
    ts.labeled = concat(ts.labeled, part);
  }
  return ts;
}

/// Test points for the training log: the test grid at the fixed encoding.
inline std::optional<TestSet> make_test_set(const Problem& pb, const ExperimentConfig& cfg) {
  try {
    const SolutionGrid g = truth_grid(pb, cfg.test.fixed_c, cfg.test.nt, cfg.test.nx, cfg.test.refine);
    TestSet ts;
    ts.Z = grid_inputs(pb, cfg.test.fixed_c, g);
    ts.U = Eigen::Map<const Eigen::MatrixXd>(g.values().data(), pb.dim_u(), ts.Z.cols());
    return ts;
  } catch (const DataError&) {
    return std::nullopt;
  }
}

// --- artifacts -------------------------------------------------------------

inline std::uint32_t file_crc32(const fs::path& p) {
  const auto bytes = io::read_file<CheckpointError>(p.string());
  return static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

/// Tracks files written under an output directory and emits manifest.txt
/// (relative path, size in bytes, crc32 hex).
class ArtifactSet {
 public:
  explicit ArtifactSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path(name).string() + "'");
    f << text;
    add(name);
  }
  void add(const std::string& name) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
  }

  void write_manifest() const {
    std::ofstream f(path("manifest.txt"), std::ios::binary);
    for (const auto& n : names_) {
      char hex[9];
      std::snprintf(hex, sizeof hex, "%08x", file_crc32(path(n)));
      f << n << ' ' << fs::file_size(path(n)) << ' ' << hex << '\n';
    }
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

inline nlohmann::json metric_json(const MetricReport& m) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  };
  return {{"mse", num(m.mse)}, {"nrmse", num(m.nrmse)}, {"nlmae", num(m.nlmae)}, {"points", m.points}, {"grid", m.grid}};
}

inline nlohmann::json loss_json(const LossBreakdown& b) {
  return {{"total", b.total}, {"data", b.data}, {"res", b.res}, {"cd", b.cd}};
}

struct ExperimentResult {
  TrainResult train;
  std::optional<MetricReport> test;  // at the fixed encoding
  std::optional<HeatmapResult> heat;
};

/// Evaluates a network: fixed-encoding test metrics and, if configured, the heatmap.
inline void evaluate_into(const NetworkWeights& net, const Problem& pb, const ExperimentConfig& cfg,
                          ExperimentResult& r, bool with_heatmap) {
  try {
    const SolutionGrid g = truth_grid(pb, cfg.test.fixed_c, cfg.test.nt, cfg.test.nx, cfg.test.refine);
    r.test = metric_report(predict_grid(net, pb, cfg.test.fixed_c, g), grid_values(g), grid_descriptor(g));
  } catch (const DataError&) {
  } catch (const MetricError&) {
  }
  if (with_heatmap && cfg.test.enabled()) r.heat = heatmap(net, pb, cfg.test, cfg.threads);
}

inline void write_report(ArtifactSet& out, const Problem& pb, const NetworkWeights& net, const ExperimentConfig& cfg,
                         const ExperimentResult& r) {
  nlohmann::json j;
  j["problem"] = pb.name();
  j["seed"] = cfg.seed;
  j["parameters"] = static_cast<long>(net.param_count());
  if (!r.train.log.empty()) {
    j["train_seconds"] = r.train.train_seconds;
    j["diverged"] = r.train.diverged;
    j["lbfgs_status"] = status_name(r.train.lbfgs_status);
    j["lbfgs_steps"] = r.train.lbfgs_steps;
    j["final_loss"] = loss_json(r.train.log.back().loss);
  }
  if (r.test) j["test"] = metric_json(*r.test);
  if (r.heat) j["heatmap"] = metric_json(r.heat->pooled);
  out.write_text("report.json", j.dump(2) + "\n");
}

/// Trains per `cfg`, evaluates, and writes the artifact set into `out_dir`.
/// On divergence the partial artifacts are written and DivergenceError is
/// rethrown.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const ProblemPtr pb = make_problem(cfg.problem, cfg.problem_options);
  ArtifactSet out{fs::path(out_dir)};
  out.write_text("config.resolved.ini", echo_config(cfg));
  const TrainingSet ts = build_training_set(*pb, cfg);
  const auto test = make_test_set(*pb, cfg);
  ExperimentResult r;
  r.train = train(*pb, ts, cfg.weights, cfg.arch, cfg.train, test ? &*test : nullptr);
  {
    std::ostringstream log;
    write_train_log(r.train.log, log);
    out.write_text("train_log.csv", log.str());
  }
  save_checkpoint(r.train.net, out.path("checkpoint.cdpn").string());
  out.add("checkpoint.cdpn");
  if (!r.train.diverged) {
    evaluate_into(r.train.net, *pb, cfg, r, true);
    if (r.heat) {
      std::ostringstream h;
      write_heatmap_csv(*pb, cfg.test, *r.heat, h);
      out.write_text("heatmap.csv", h.str());
    }
  }
  write_report(out, *pb, r.train.net, cfg, r);
  out.write_manifest();
  if (r.train.diverged) throw DivergenceError(r.train.message);
  return r;
}

// --- timing ----------------------------------------------------------------

struct TimingRow {
  double nu = 0.0;
  double fdm_seconds = 0.0;
  double fdm_cumulative = 0.0;
  double inference_seconds = 0.0;
  double network_cumulative = 0.0;  // training seconds + inference so far
};

/// Solves Burgers with the implicit FDM for each nu and evaluates the
/// network on the same nt x nx grid.
inline std::vector<TimingRow> timing_compare(const std::vector<double>& nus, int nx, int nt,
                                             const NetworkWeights& net, const Problem& pb, double train_seconds) {
  using Clock = std::chrono::steady_clock;
  auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  std::vector<TimingRow> rows;
  double fdm_total = 0.0, net_total = train_seconds;
  for (double nu : nus) {
    TimingRow row;
    row.nu = nu;
    auto t0 = Clock::now();
    const SolutionGrid g = burgers_newton_implicit(nu, nx, nt, 1e-10, 50, pb.t1());
    auto t1 = Clock::now();
    const double c[1] = {nu};
    const Eigen::ArrayXd pred = predict_grid(net, pb, c, g);
    auto t2 = Clock::now();
    if (!pred.allFinite()) throw DivergenceError("non-finite network output during timing");
    row.fdm_seconds = secs(t0, t1);
    row.inference_seconds = secs(t1, t2);
    fdm_total += row.fdm_seconds;
    net_total += row.inference_seconds;
    row.fdm_cumulative = fdm_total;
    row.network_cumulative = net_total;
    rows.push_back(row);
  }
  return rows;
}

inline void write_timing_csv(const std::vector<TimingRow>& rows, std::ostream& os) {
  os << "nu,fdm_seconds,fdm_cumulative_seconds,inference_seconds,cdpinn_cumulative_seconds\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.nu << ',' << r.fdm_seconds << ',' << r.fdm_cumulative << ',' << r.inference_seconds << ','
       << r.network_cumulative << '\n';
  }
}

/// Reads train_seconds from a report.json next to a checkpoint, 0 if absent.
inline double read_train_seconds(const fs::path& report) {
  std::ifstream f(report);
  if (!f) return 0.0;
  try {
    const auto j = nlohmann::json::parse(f);
    return j.value("train_seconds", 0.0);
  } catch (const nlohmann::json::exception&) {
    throw DataError("malformed report '" + report.string() + "'");
  }
}

// --- synthetic observations ------------------------------------------------

/// Observations on an nt_obs x nx_obs subset of a 1D or graph grid, with
/// multiplicative Gaussian noise value * (1 + noise * N(0, 1)). Time slice
/// 0 (the known initial state) is skipped.
inline ObservationSet sample_observations(const SolutionGrid& g, int nt_obs, int nx_obs, double noise,
                                          std::uint64_t seed) {
  if (nt_obs < 1 || nx_obs < 1) throw ConfigError("observation counts must be >= 1");
  if (noise < 0.0) throw ConfigError("noise level must be >= 0");
  const int T = static_cast<int>(g.t().size());
  if (T < 2) throw DataError("grid needs at least two time slices");
  const bool graph = g.space_dims() == 0;
  const int X = graph ? g.components() : static_cast<int>(g.x(0).size());
  Rng rng(seed);
  ObservationSet obs;
  obs.noise = noise;
  for (int a = 1; a <= nt_obs; ++a) {
    const int it = static_cast<int>(std::lround(static_cast<double>(a) * (T - 1) / nt_obs));
    for (int b = 0; b < nx_obs; ++b) {
      const int ix = nx_obs == 1 ? X / 2 : static_cast<int>(std::lround(static_cast<double>(b) * (X - 1) / (nx_obs - 1)));
      const double v = graph ? g(it, 0, ix) : g(it, ix, 0);
      const double pos = graph ? static_cast<double>(ix) : g.x(0)[ix];
      obs.add(g.t()[it], pos, noise > 0.0 ? v * (1.0 + noise * rng.normal()) : v);
    }
  }
  return obs;
}

}  // namespace cdpinn
