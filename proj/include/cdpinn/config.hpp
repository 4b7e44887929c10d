#pragma once

// Experiment configuration: INI-style sections read with
// Boost.PropertyTree, validated into typed structs. Unknown sections or
// keys are rejected so typos do not pass silently.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/losses.hpp"
#include "cdpinn/network.hpp"
#include "cdpinn/optim.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/sampling.hpp"

namespace cdpinn {

/// Encoding-space test grid: up to two encoding axes, each cell evaluated on
/// an (nt x nx^d) space-time grid.
struct TestGridSpec {
  struct Axis {
    std::string name;
    double lo = 0.0, hi = 0.0;
    int steps = 1;
  };
  std::vector<Axis> axes;
  std::vector<double> fixed_c;  // values for encoding components not on an axis
  int nt = 21;
  int nx = 101;
  int refine = 4;  // oracle refinement factor for numerical truth
  bool enabled() const { return !axes.empty(); }
};

/// Resolution of numerical truth grids used as labeled-data sources.
struct TruthGridSpec {
  int nt = 200;
  int nx = 200;
  int refine = 1;
};

struct ExperimentConfig {
  std::string problem;
  ProblemOptions problem_options;
  ArchitectureConfig arch;
  TrainConfig train;
  LossWeights weights;
  SamplingConfig sampling;
  std::vector<std::vector<double>> labeled_configs;  // one or more encodings with labeled data
  TestGridSpec test;
  TruthGridSpec truth;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
};

namespace detail {

inline std::vector<double> parse_doubles(const std::string& s, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(where + ": empty list element");
    try {
      size_t used = 0;
      out.push_back(std::stod(item.substr(b), &used));
      if (item.find_first_not_of(" \t", b + used) != std::string::npos) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(where + ": '" + item + "' is not a number");
    }
  }
  return out;
}

class Section {
 public:
  Section(const boost::property_tree::ptree* pt, std::string name) : pt_(pt), name_(std::move(name)) {}

  bool has(const std::string& key) const { return pt_ && pt_->find(key) != pt_->not_found(); }
  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return pt_->get<std::string>(key);
  }
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  double num(const std::string& key, double fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    auto xs = parse_doubles(*v, where(key));
    if (xs.size() != 1) throw ConfigError(where(key) + ": expected one number");
    return xs[0];
  }
  long integer(const std::string& key, long fallback) {
    const double v = num(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw ConfigError(where(key) + ": expected an integer");
    return static_cast<long>(v);
  }
  bool boolean(const std::string& key, bool fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(where(key) + ": expected true or false");
  }
  std::string text(const std::string& key, const std::string& fallback) { return raw(key).value_or(fallback); }
  std::vector<double> list(const std::string& key, std::vector<double> fallback) {
    auto v = raw(key);
    return v ? parse_doubles(*v, where(key)) : fallback;
  }

  void finish() const {
    if (!pt_) return;
    for (const auto& [k, v] : *pt_) {
      if (!used_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
    }
  }

 private:
  const boost::property_tree::ptree* pt_;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Parses configuration text. `origin` names the source in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  boost::property_tree::ptree pt;
  try {
    std::istringstream is(text);
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> known = {"run", "problem", "architecture", "training",
                                              "loss", "sampling", "test", "truth"};
  for (const auto& [name, sec] : pt) {
    if (!known.count(name)) {
      throw ConfigError(origin + ": unknown section or top-level key '" + name + "'");
    }
  }
  auto section = [&](const std::string& n) {
    auto it = pt.find(n);
    return detail::Section(it == pt.not_found() ? nullptr : &it->second, n);
  };

  ExperimentConfig c;
  {
    auto s = section("run");
    c.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    c.out_dir = s.text("out", c.out_dir);
    c.threads = static_cast<int>(s.integer("threads", 1));
    if (c.threads < 1) throw ConfigError("[run] threads: must be >= 1");
    s.finish();
  }
  auto* prob = pt.find("problem") == pt.not_found() ? nullptr : &pt.find("problem")->second;
  if (!prob || prob->find("name") == prob->not_found()) throw ConfigError(origin + ": [problem] name is required");
  c.problem = prob->get<std::string>("name");
  for (const auto& [k, v] : *prob) {
    if (k == "name") continue;
    auto xs = detail::parse_doubles(v.data(), "[problem] " + k);
    if (xs.size() != 1) throw ConfigError("[problem] " + k + ": expected one number");
    c.problem_options[k] = xs[0];
  }
  const ProblemPtr pb = make_problem(c.problem, c.problem_options);

  {
    auto s = section("architecture");
    std::vector<double> w = s.list("widths", std::vector<double>(c.arch.widths.begin(), c.arch.widths.end()));
    if (w.empty()) throw ConfigError("[architecture] widths: at least one hidden layer required");
    c.arch.widths.clear();
    for (double x : w) {
      if (x < 1 || x != std::floor(x)) throw ConfigError("[architecture] widths: entries must be positive integers");
      c.arch.widths.push_back(static_cast<int>(x));
    }
    c.arch.activation = parse_activation(s.text("activation", "tanh"));
    c.arch.seed = c.seed;
    s.finish();
  }
  {
    auto s = section("training");
    auto& t = c.train;
    t.adam_steps = static_cast<int>(s.integer("adam_steps", t.adam_steps));
    t.adam.lr = s.num("lr", t.adam.lr);
    t.adam.beta1 = s.num("beta1", t.adam.beta1);
    t.adam.beta2 = s.num("beta2", t.adam.beta2);
    t.adam.eps = s.num("eps", t.adam.eps);
    t.lbfgs_steps = static_cast<int>(s.integer("lbfgs_steps", t.lbfgs_steps));
    t.lbfgs.history = static_cast<int>(s.integer("history", t.lbfgs.history));
    t.lbfgs.c1 = s.num("c1", t.lbfgs.c1);
    t.lbfgs.c2 = s.num("c2", t.lbfgs.c2);
    t.lbfgs.grad_tol = s.num("grad_tol", t.lbfgs.grad_tol);
    t.lbfgs.max_line_search = static_cast<int>(s.integer("max_line_search", t.lbfgs.max_line_search));
    t.log_interval = static_cast<int>(s.integer("log_interval", t.log_interval));
    t.log_wall_time = s.boolean("log_wall_time", t.log_wall_time);
    t.record_cd = s.boolean("record_cd", t.record_cd);
    t.chunk = static_cast<int>(s.integer("chunk", t.chunk));
    if (s.has("epochs")) {
      if (s.has("adam_steps") || s.has("lbfgs_steps")) {
        throw ConfigError("[training] epochs: give either epochs or adam_steps/lbfgs_steps");
      }
      const int e = static_cast<int>(s.integer("epochs", 0));
      if (e < 0) throw ConfigError("[training] epochs: must be >= 0");
      auto split = TrainConfig::with_epochs(e);
      t.adam_steps = split.adam_steps;
      t.lbfgs_steps = split.lbfgs_steps;
    }
    s.finish();
    try {
      t.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("[training] ") + e.what());
    }
  }
  {
    auto s = section("loss");
    c.weights.data = s.num("data", 1.0);
    c.weights.res = s.num("res", 1.0);
    c.weights.cd = s.num("cd", 1.0);
    s.finish();
    try {
      c.weights.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("[loss] ") + e.what());
    }
  }
  {
    auto s = section("sampling");
    c.sampling = default_sampling(*pb);
    c.sampling.seed = c.seed;
    c.sampling.n_labeled = static_cast<int>(s.integer("n_labeled", c.sampling.n_labeled));
    c.sampling.n_residual = static_cast<int>(s.integer("n_residual", c.sampling.n_residual));
    c.sampling.n_boundary = static_cast<int>(s.integer("n_boundary", c.sampling.n_boundary));
    c.sampling.n_initial = static_cast<int>(s.integer("n_initial", c.sampling.n_initial));
    c.sampling.strategy = parse_strategy(s.text("strategy", "latin-hypercube"));
    // labeled_c: one encoding, or several separated by ';'
    std::string lc = s.text("labeled_c", "");
    if (lc.empty()) {
      c.labeled_configs = {c.sampling.labeled_c};
    } else {
      std::stringstream ss(lc);
      std::string item;
      while (std::getline(ss, item, ';')) c.labeled_configs.push_back(detail::parse_doubles(item, "[sampling] labeled_c"));
    }
    for (const auto& v : c.labeled_configs) {
      try {
        check_encoding(*pb, v);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("[sampling] labeled_c: ") + e.what());
      }
    }
    c.sampling.labeled_c = c.labeled_configs.front();
    s.finish();
  }
  {
    auto s = section("test");
    for (int a = 0; a < 2; ++a) {
      const std::string key = "axis" + std::to_string(a);
      auto name = s.raw(key);
      auto range = s.list(key + "_range", {});
      const long steps = s.integer(key + "_steps", 1);
      if (!name) continue;
      TestGridSpec::Axis ax;
      ax.name = *name;
      pb->encoding_index(ax.name);
      const int k = pb->encoding_index(ax.name);
      if (range.empty()) range = {pb->c_lo()[k], pb->c_hi()[k]};
      if (range.size() != 2 || range[0] > range[1]) throw ConfigError("[test] " + key + "_range: expected lo, hi");
      if (range[0] < pb->c_lo()[k] || range[1] > pb->c_hi()[k]) {
        throw ConfigError("[test] " + key + "_range: outside the encoding range of " + ax.name);
      }
      if (steps < 1) throw ConfigError("[test] " + key + "_steps: must be >= 1");
      ax.lo = range[0], ax.hi = range[1], ax.steps = static_cast<int>(steps);
      c.test.axes.push_back(ax);
    }
    c.test.fixed_c = s.list("fixed_c", c.labeled_configs.front());
    if (static_cast<int>(c.test.fixed_c.size()) != pb->layout().dim_c) {
      throw ConfigError("[test] fixed_c: wrong number of components");
    }
    c.test.nt = static_cast<int>(s.integer("nt", c.test.nt));
    c.test.nx = static_cast<int>(s.integer("nx", c.test.nx));
    c.test.refine = static_cast<int>(s.integer("refine", c.test.refine));
    if (c.test.nt < 1 || c.test.nx < 1 || c.test.refine < 1) throw ConfigError("[test] grid sizes must be >= 1");
    s.finish();
  }
  {
    auto s = section("truth");
    c.truth.nt = static_cast<int>(s.integer("nt", c.truth.nt));
    c.truth.nx = static_cast<int>(s.integer("nx", c.truth.nx));
    c.truth.refine = static_cast<int>(s.integer("refine", c.truth.refine));
    if (c.truth.nt < 3 || c.truth.nx < 3 || c.truth.refine < 1) throw ConfigError("[truth] grid sizes must be >= 3");
    s.finish();
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

/// Fully resolved configuration, re-parseable by parse_config.
inline std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << std::setprecision(17);
  auto list = [&](const auto& v) {
    for (size_t i = 0; i < v.size(); ++i) o << (i ? ", " : "") << v[i];
  };
  o << "[run]\nseed = " << c.seed << "\nout = " << c.out_dir << "\nthreads = " << c.threads << "\n\n";
  o << "[problem]\nname = " << c.problem << "\n";
  for (const auto& [k, v] : c.problem_options) o << k << " = " << v << "\n";
  o << "\n[architecture]\nwidths = ";
  list(c.arch.widths);
  o << "\nactivation = " << activation_name(c.arch.activation) << "\n\n";
  const auto& t = c.train;
  o << "[training]\nadam_steps = " << t.adam_steps << "\nlr = " << t.adam.lr << "\nbeta1 = " << t.adam.beta1
    << "\nbeta2 = " << t.adam.beta2 << "\neps = " << t.adam.eps << "\nlbfgs_steps = " << t.lbfgs_steps
    << "\nhistory = " << t.lbfgs.history << "\nc1 = " << t.lbfgs.c1 << "\nc2 = " << t.lbfgs.c2
    << "\ngrad_tol = " << t.lbfgs.grad_tol << "\nmax_line_search = " << t.lbfgs.max_line_search
    << "\nlog_interval = " << t.log_interval << "\nlog_wall_time = " << (t.log_wall_time ? "true" : "false")
    << "\nrecord_cd = " << (t.record_cd ? "true" : "false") << "\nchunk = " << t.chunk << "\n\n";
  o << "[loss]\ndata = " << c.weights.data << "\nres = " << c.weights.res << "\ncd = " << c.weights.cd << "\n\n";
  o << "[sampling]\nn_labeled = " << c.sampling.n_labeled << "\nlabeled_c = ";
  for (size_t i = 0; i < c.labeled_configs.size(); ++i) {
    if (i) o << "; ";
    list(c.labeled_configs[i]);
  }
  o << "\nn_residual = " << c.sampling.n_residual << "\nn_boundary = " << c.sampling.n_boundary
    << "\nn_initial = " << c.sampling.n_initial << "\nstrategy = " << strategy_name(c.sampling.strategy) << "\n\n";
  o << "[test]\n";
  for (size_t a = 0; a < c.test.axes.size(); ++a) {
    const auto& ax = c.test.axes[a];
    o << "axis" << a << " = " << ax.name << "\naxis" << a << "_range = " << ax.lo << ", " << ax.hi << "\naxis" << a
      << "_steps = " << ax.steps << "\n";
  }
  o << "fixed_c = ";
  list(c.test.fixed_c);
  o << "\nnt = " << c.test.nt << "\nnx = " << c.test.nx << "\nrefine = " << c.test.refine << "\n\n";
  o << "[truth]\nnt = " << c.truth.nt << "\nnx = " << c.truth.nx << "\nrefine = " << c.truth.refine << "\n";
  return o.str();
}

}  // namespace cdpinn
