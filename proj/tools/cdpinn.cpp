// Command-line driver. Every subcommand writes under --out and finishes
// with a manifest of the files it produced.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "cdpinn/cdpinn.hpp"

using namespace cdpinn;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

ExperimentConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this subcommand");
  ExperimentConfig c = load_config(g.config);
  if (g.seed) {
    c.seed = *g.seed;
    c.arch.seed = *g.seed;
    c.sampling.seed = *g.seed;
  }
  if (const char* env = std::getenv("CDPINN_THREADS")) {
    try {
      c.threads = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("CDPINN_THREADS must be an integer");
    }
  }
  if (g.threads) c.threads = *g.threads;
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (!g.out.empty()) c.out_dir = g.out;
  return c;
}

std::string out_dir(const Globals& g, const char* fallback) { return g.out.empty() ? fallback : g.out; }

void print_metrics(const char* label, const MetricReport& m) {
  std::cout << label << ": mse " << m.mse << "  nrmse " << m.nrmse << "  nlmae " << m.nlmae << "  (" << m.points
            << " points, " << m.grid << ")\n";
}

void cmd_train(const Globals& g) {
  const ExperimentConfig c = load(g);
  const auto r = run_experiment(c, c.out_dir);
  const auto& last = r.train.log.back();
  std::cout << "trained " << c.problem << " for " << last.epoch << " epochs, loss " << last.loss.total << "\n";
  if (r.test) print_metrics("test", *r.test);
  if (r.heat) print_metrics("heatmap", r.heat->pooled);
  std::cout << "artifacts in " << c.out_dir << "\n";
}

void cmd_evaluate(const Globals& g, const std::string& ckpt, bool heat_only) {
  const ExperimentConfig c = load(g);
  const ProblemPtr pb = make_problem(c.problem, c.problem_options);
  const NetworkWeights net = load_checkpoint(ckpt);
  ArtifactSet out{fs::path(c.out_dir)};
  ExperimentResult r;
  if (heat_only) {
    r.heat = heatmap(net, *pb, c.test, c.threads);
  } else {
    evaluate_into(net, *pb, c, r, true);
    if (r.test) print_metrics("test", *r.test);
    write_report(out, *pb, net, c, r);
  }
  if (r.heat) {
    std::ostringstream h;
    write_heatmap_csv(*pb, c.test, *r.heat, h);
    out.write_text("heatmap.csv", h.str());
    print_metrics("heatmap", r.heat->pooled);
  }
  out.write_manifest();
}

void cmd_fdm(const Globals& g, double nu, int nx, int nt) {
  ArtifactSet out{fs::path(out_dir(g, "out"))};
  NewtonStats st;
  const SolutionGrid grid = burgers_newton_implicit(nu, nx, nt, 1e-10, 50, 0.5, &st);
  save_grid(grid, out.path("burgers.cdgr").string());
  out.add("burgers.cdgr");
  std::ostringstream csv;
  write_grid_csv(grid, csv);
  out.write_text("burgers.csv", csv.str());
  out.write_manifest();
  std::cout << "burgers nu=" << nu << " on " << nt << "x" << nx << ", max newton residual " << st.max_residual
            << ", max iterations " << st.max_iterations << "\n";
}

void cmd_timing(const Globals& g, const std::string& ckpt, const std::string& report, int count, double lo, double hi,
                int nx, int nt) {
  const ProblemPtr pb = make_problem("burgers1d", {});
  const NetworkWeights net = load_checkpoint(ckpt);
  const double train_s = read_train_seconds(report.empty() ? fs::path(ckpt).parent_path() / "report.json" : fs::path(report));
  std::vector<double> nus;
  if (count > 0) nus = linspace(lo, hi, count);
  ArtifactSet out{fs::path(out_dir(g, "out"))};
  std::ostringstream csv;
  write_timing_csv(timing_compare(nus, nx, nt, net, *pb, train_s), csv);
  out.write_text("timing.csv", csv.str());
  out.write_manifest();
}

std::vector<double> encoding_or(const Problem& pb, const std::vector<double>& given, const std::vector<double>& dflt) {
  const auto& c = given.empty() ? dflt : given;
  check_encoding(pb, c);
  return c;
}

void cmd_invert(const Globals& g, const std::string& ckpt, const std::string& obs_path, const std::vector<double>& init,
                InverseConfig icfg) {
  const ExperimentConfig c = load(g);
  const ProblemPtr pb = make_problem(c.problem, c.problem_options);
  const NetworkWeights net = load_checkpoint(ckpt);
  const ObservationSet obs = read_observations(obs_path);
  const auto c0 = encoding_or(*pb, init, c.labeled_configs.front());
  icfg.seed = c.seed;
  const auto r = estimate(net, *pb, obs, c0, pb->c_lo(), pb->c_hi(), icfg);
  ArtifactSet out{fs::path(c.out_dir)};
  std::ostringstream o;
  write_estimate(*pb, r, o);
  out.write_text("estimate.ini", o.str());
  out.write_manifest();
  std::cout << "estimate:";
  for (int k = 0; k < pb->layout().dim_c; ++k) std::cout << ' ' << pb->c_names()[k] << '=' << r.c[k];
  std::cout << "  misfit " << r.objective << "\n";
}

void cmd_landscape(const Globals& g, const std::string& ckpt, const std::string& obs_path, int steps) {
  const ExperimentConfig c = load(g);
  const ProblemPtr pb = make_problem(c.problem, c.problem_options);
  const NetworkWeights net = load_checkpoint(ckpt);
  const ObservationSet obs = read_observations(obs_path);
  if (pb->layout().dim_c != 2) throw UnsupportedError("landscape needs a two-component encoding");
  const auto a0 = linspace(pb->c_lo()[0], pb->c_hi()[0], steps);
  const auto a1 = linspace(pb->c_lo()[1], pb->c_hi()[1], steps);
  ArtifactSet out{fs::path(c.out_dir)};
  std::ostringstream csv;
  write_landscape_csv(*pb, a0, a1, loss_landscape(net, *pb, obs, a0, a1), csv);
  out.write_text("landscape.csv", csv.str());
  out.write_manifest();
}

void cmd_generate(const Globals& g, const std::vector<double>& enc, int obs_nt, int obs_nx, double noise) {
  const ExperimentConfig c = load(g);
  const ProblemPtr pb = make_problem(c.problem, c.problem_options);
  const auto cc = encoding_or(*pb, enc, c.labeled_configs.front());
  const SolutionGrid grid = truth_grid(*pb, cc, c.truth.nt, c.truth.nx, c.truth.refine);
  ArtifactSet out{fs::path(c.out_dir)};
  save_grid(grid, out.path("truth.cdgr").string());
  out.add("truth.cdgr");
  std::ostringstream csv;
  write_grid_csv(grid, csv);
  out.write_text("truth.csv", csv.str());
  if (obs_nt > 0 && pb->layout().has_time && pb->layout().dim_x <= 1) {
    const ObservationSet obs = sample_observations(grid, obs_nt, obs_nx, noise, derive_seed(c.seed, 7));
    std::ostringstream o;
    write_observations(obs, o);
    out.write_text("observations.csv", o.str());
  }
  out.write_manifest();
  std::cout << "wrote " << grid_descriptor(grid) << " to " << c.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdpinn: continuous-dependence PINN training, evaluation and inversion"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", g.config, "experiment config file");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", g.out, "output directory");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (overrides CDPINN_THREADS)");

  auto* train = app.add_subcommand("train", "train a network and write all artifacts");
  std::string ckpt, report, obs_path;
  auto* evaluate = app.add_subcommand("evaluate", "metrics and heatmap for a checkpoint");
  evaluate->add_option("--checkpoint", ckpt)->required();
  auto* heat = app.add_subcommand("heatmap", "per-cell metrics over the configured encoding grid");
  heat->add_option("--checkpoint", ckpt)->required();

  double nu = 0.05;
  int nx = 201, nt = 201;
  auto* fdm = app.add_subcommand("fdm", "implicit Burgers reference solve");
  fdm->add_option("--nu", nu);
  fdm->add_option("--nx", nx);
  fdm->add_option("--nt", nt);

  int count = 40;
  double lo = 0.01, hi = 0.1;
  auto* timing = app.add_subcommand("timing", "FDM vs network wall time over a nu sweep");
  timing->add_option("--checkpoint", ckpt)->required();
  timing->add_option("--report", report, "report.json holding train_seconds");
  timing->add_option("--count", count, "number of nu values (0 writes only the header)");
  timing->add_option("--nu-lo", lo);
  timing->add_option("--nu-hi", hi);
  timing->add_option("--nx", nx);
  timing->add_option("--nt", nt);

  std::vector<double> enc;
  InverseConfig icfg;
  auto* invert = app.add_subcommand("invert", "estimate the encoding from observations");
  invert->add_option("--checkpoint", ckpt)->required();
  invert->add_option("--observations", obs_path)->required();
  invert->add_option("--init", enc, "initial encoding")->delimiter(',');
  invert->add_option("--starts", icfg.starts);
  invert->add_option("--lr", icfg.lr);
  invert->add_option("--steps", icfg.max_steps);

  int steps = 50;
  auto* landscape = app.add_subcommand("landscape", "misfit over a 2D encoding grid");
  landscape->add_option("--checkpoint", ckpt)->required();
  landscape->add_option("--observations", obs_path)->required();
  landscape->add_option("--steps", steps);

  int obs_nt = 0, obs_nx = 11;
  double noise = 0.0;
  auto* gen = app.add_subcommand("generate-data", "truth grid and optional noisy observations");
  gen->add_option("--c", enc, "encoding")->delimiter(',');
  gen->add_option("--obs-nt", obs_nt, "observation times (0 = none)");
  gen->add_option("--obs-nx", obs_nx, "observation positions per time");
  gen->add_option("--noise", noise, "relative Gaussian noise level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }
  if (seed_opt->count()) g.seed = seed;
  if (threads_opt->count()) g.threads = threads;

  try {
    if (train->parsed()) cmd_train(g);
    if (evaluate->parsed()) cmd_evaluate(g, ckpt, false);
    if (heat->parsed()) cmd_evaluate(g, ckpt, true);
    if (fdm->parsed()) cmd_fdm(g, nu, nx, nt);
    if (timing->parsed()) cmd_timing(g, ckpt, report, count, lo, hi, nx, nt);
    if (invert->parsed()) cmd_invert(g, ckpt, obs_path, enc, icfg);
    if (landscape->parsed()) cmd_landscape(g, ckpt, obs_path, steps);
    if (gen->parsed()) cmd_generate(g, enc, obs_nt, obs_nx, noise);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
  return 0;
}
