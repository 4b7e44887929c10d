#pragma once

// Reference solvers producing SolutionGrids: implicit Newton FDM and
// MacCormack for Burgers, RK4 for graph Fisher-Kolmogorov, Crank-Nicolson
// with logistic splitting for continuum Fisher-Kolmogorov, and closed-form
// grids.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/graph.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/solution_grid.hpp"

namespace cdpinn {

namespace detail {

/// Thomas algorithm for a tridiagonal system (a: sub, b: diag, c: super).
inline void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<double>& c, std::vector<double>& d) {
  const size_t n = b.size();
  std::vector<double> cp(n), dp(n);
  cp[0] = c[0] / b[0];
  dp[0] = d[0] / b[0];
  for (size_t i = 1; i < n; ++i) {
    const double m = b[i] - a[i] * cp[i - 1];
    if (m == 0.0 || !std::isfinite(m)) throw SolverError("singular tridiagonal system");
    cp[i] = c[i] / m;
    dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
  }
  d[n - 1] = dp[n - 1];
  for (size_t i = n - 1; i-- > 0;) d[i] = dp[i] - cp[i] * d[i + 1];
}

}  // namespace detail

struct NewtonStats {
  double max_residual = 0.0;  // largest final Newton residual over all steps
  int max_iterations = 0;
};

/// Viscous Burgers on [-1, 1] x [0, T], u(x, 0) = -sin(pi x), u(+-1, t) = 0.
/// Backward Euler in time, central differences in space, Newton per step
/// with a tridiagonal Jacobian. nx, nt count grid nodes including the ends.
inline SolutionGrid burgers_newton_implicit(double nu, int nx, int nt, double newton_tol = 1e-10,
                                            int newton_max = 50, double T = 0.5, NewtonStats* stats = nullptr) {
  if (!(nu > 0.0)) throw ConfigError("burgers: nu must be > 0");
  if (nx < 3 || nt < 3) throw ConfigError("burgers: nx and nt must be >= 3");
  auto x = linspace(-1.0, 1.0, nx);
  auto t = linspace(0.0, T, nt);
  SolutionGrid g(t, {x}, 1, "fdm");
  g.params() = {{"nu", nu}, {"nx", nx}, {"nt", nt}, {"newton_tol", newton_tol}, {"T", T}};
  const double dx = 2.0 / (nx - 1);
  const double dt = T / (nt - 1);
  std::vector<double> u(nx), un(nx);
  for (int i = 0; i < nx; ++i) u[i] = -std::sin(M_PI * x[i]);
  u.front() = u.back() = 0.0;
  for (int i = 0; i < nx; ++i) g(0, i) = i == 0 || i == nx - 1 ? 0.0 : -std::sin(M_PI * x[i]);

  const int n = nx - 2;
  std::vector<double> F(n), a(n), b(n), c(n);
  const double k1 = dt / (2.0 * dx), k2 = nu * dt / (dx * dx);
  NewtonStats st;
  for (int step = 1; step < nt; ++step) {
    un = u;
    // F_i(v) = v_i - u^n_i + dt v_i (v_{i+1} - v_{i-1}) / (2 dx) - nu dt (v_{i+1} - 2 v_i + v_{i-1}) / dx^2
    auto residual = [&](const std::vector<double>& v) {
      double m = 0.0;
      for (int j = 0; j < n; ++j) {
        const int i = j + 1;
        F[j] = v[i] - un[i] + k1 * v[i] * (v[i + 1] - v[i - 1]) - k2 * (v[i + 1] - 2.0 * v[i] + v[i - 1]);
        m = std::max(m, std::abs(F[j]));
      }
      return m;
    };
    double res = residual(u);
    int it = 0;
    while (res >= newton_tol) {
      if (it == newton_max) {
        throw SolverError("Newton iteration did not converge at time step " + std::to_string(step) +
                          " (residual " + std::to_string(res) + ")");
      }
      for (int j = 0; j < n; ++j) {
        const int i = j + 1;
        a[j] = -k1 * u[i] - k2;
        b[j] = 1.0 + k1 * (u[i + 1] - u[i - 1]) + 2.0 * k2;
        c[j] = k1 * u[i] - k2;
      }
      for (int j = 0; j < n; ++j) F[j] = -F[j];
      detail::solve_tridiagonal(a, b, c, F);
      for (int j = 0; j < n; ++j) u[j + 1] += F[j];
      res = residual(u);
      ++it;
      if (!std::isfinite(res)) throw SolverError("Newton iteration diverged at time step " + std::to_string(step));
    }
    st.max_residual = std::max(st.max_residual, res);
    st.max_iterations = std::max(st.max_iterations, it);
    for (int i = 0; i < nx; ++i) g(step, i) = u[i];
  }
  if (stats) *stats = st;
  return g;
}

/// Inviscid Burgers u_t + (u^2/2)_x = 0 on [-1, 1] x [0, T] with u = 0 at
/// both ends, MacCormack predictor-corrector in conservation form.
inline SolutionGrid burgers_maccormack(int nx, int nt, const std::function<double(double)>& u0, double T = 0.5) {
  if (nx < 3 || nt < 2) throw ConfigError("maccormack: nx >= 3 and nt >= 2 required");
  auto x = linspace(-1.0, 1.0, nx);
  auto t = linspace(0.0, T, nt);
  SolutionGrid g(t, {x}, 1, "maccormack");
  g.params() = {{"nx", nx}, {"nt", nt}, {"T", T}};
  const double dx = 2.0 / (nx - 1), dt = T / (nt - 1), r = dt / dx;
  std::vector<double> u(nx), us(nx), f(nx), fs(nx);
  for (int i = 0; i < nx; ++i) u[i] = u0(x[i]);
  u.front() = u.back() = 0.0;
  for (int i = 0; i < nx; ++i) g(0, i) = u[i];
  for (int step = 1; step < nt; ++step) {
    double umax = 0.0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    if (umax * r > 1.0) {
      throw StabilityError("CFL condition violated at step " + std::to_string(step) + ": max|u| dt/dx = " +
                           std::to_string(umax * r) + " > 1");
    }
    for (int i = 0; i < nx; ++i) f[i] = 0.5 * u[i] * u[i];
    us.front() = us.back() = 0.0;
    for (int i = 1; i < nx - 1; ++i) us[i] = u[i] - r * (f[i + 1] - f[i]);
    for (int i = 0; i < nx; ++i) fs[i] = 0.5 * us[i] * us[i];
    for (int i = 1; i < nx - 1; ++i) u[i] = 0.5 * (u[i] + us[i] - r * (fs[i] - fs[i - 1]));
    for (int i = 0; i < nx; ++i) {
      if (!std::isfinite(u[i])) throw StabilityError("non-finite state at step " + std::to_string(step));
      g(step, i) = u[i];
    }
  }
  return g;
}

inline SolutionGrid burgers_maccormack(int nx, int nt, double T = 0.5) {
  return burgers_maccormack(nx, nt, [](double x) { return -std::sin(M_PI * x); }, T);
}

/// Inviscid Burgers with u0 = -sin(pi x) before shock formation (t < 1/pi),
/// by solving u = u0(x - u t) along characteristics.
inline double burgers_characteristics(double t, double x) {
  if (t >= 1.0 / M_PI) throw UnsupportedError("characteristic solution only valid before t = 1/pi");
  double u = -std::sin(M_PI * x);
  for (int it = 0; it < 100; ++it) {
    const double xi = x - u * t;
    const double F = u + std::sin(M_PI * xi);
    const double dF = 1.0 - M_PI * t * std::cos(M_PI * xi);
    const double du = F / dF;
    u -= du;
    if (std::abs(du) < 1e-15) break;
  }
  return u;
}

/// Classical RK4 for dc/dt = -D L c + alpha c (1 - c). Stores every
/// `store_every`-th step plus the final state.
inline SolutionGrid fk_graph_rk4(const GraphModel& graph, const Eigen::VectorXd& c0, double D, double alpha, double dt,
                                 double T, int store_every = 1) {
  const int N = graph.nodes();
  if (c0.size() != N) throw ShapeError("initial state length does not match the graph");
  if (!(D > 0.0) || !(alpha > 0.0) || !(dt > 0.0) || !(T >= 0.0)) throw ConfigError("rk4: need D, alpha, dt > 0");
  if ((c0.array() < 0.0).any() || (c0.array() > 1.0).any()) throw ConfigError("rk4: c0 must lie in [0, 1]");
  if (store_every < 1) throw ConfigError("rk4: store_every must be >= 1");
  const long steps = std::lround(T / dt);
  if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T)) throw ConfigError("rk4: T must be a multiple of dt");
  const Eigen::MatrixXd& L = graph.laplacian();
  auto rhs = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
    return -D * (L * c) + alpha * c.cwiseProduct((1.0 - c.array()).matrix());
  };
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  Eigen::VectorXd c = c0;
  times.push_back(0.0);
  states.push_back(c);
  for (long s = 1; s <= steps; ++s) {
    const Eigen::VectorXd k1 = rhs(c);
    const Eigen::VectorXd k2 = rhs(c + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = rhs(c + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = rhs(c + dt * k3);
    c += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!c.allFinite()) {
      throw StabilityError("non-finite state at t = " + std::to_string(s * dt) + "; try a smaller dt");
    }
    if (s % store_every == 0 || s == steps) {
      times.push_back(static_cast<double>(s) * dt);
      states.push_back(c);
    }
  }
  SolutionGrid g(times, {}, N, "rk4");
  g.params() = {{"D", D}, {"alpha", alpha}, {"dt", dt}, {"T", T}};
  for (size_t i = 0; i < times.size(); ++i) {
    for (int n = 0; n < N; ++n) g(i, 0, n) = states[i][n];
  }
  return g;
}

/// Continuum Fisher-Kolmogorov on [0, 1] with zero-flux ends. Strang
/// splitting: half logistic step (exact flow), Crank-Nicolson diffusion
/// with ghost-node reflection, half logistic step.
inline SolutionGrid fk_continuum_cn(double D, double alpha, int nx, int nt, const std::function<double(double)>& u0,
                                    double T = 1.0) {
  if (!(D > 0.0) || alpha < 0.0) throw ConfigError("fk-continuum: need D > 0 and alpha >= 0");
  if (nx < 3 || nt < 2) throw ConfigError("fk-continuum: nx >= 3 and nt >= 2 required");
  auto x = linspace(0.0, 1.0, nx);
  auto t = linspace(0.0, T, nt);
  SolutionGrid g(t, {x}, 1, "crank-nicolson");
  g.params() = {{"D", D}, {"alpha", alpha}, {"nx", nx}, {"nt", nt}, {"T", T}};
  const double dx = 1.0 / (nx - 1), dt = T / (nt - 1), r = D * dt / (dx * dx);
  std::vector<double> u(nx), rhs(nx), a(nx), b(nx), c(nx);
  for (int i = 0; i < nx; ++i) u[i] = u0(x[i]);
  for (int i = 0; i < nx; ++i) g(0, i) = u[i];
  auto logistic = [&](double h) {
    if (alpha == 0.0) return;
    const double e = std::exp(alpha * h);
    for (double& v : u) v = v * e / (1.0 - v + v * e);
  };
  // (I - r/2 L) with L the reflected second difference.
  for (int i = 0; i < nx; ++i) {
    a[i] = -0.5 * r;
    b[i] = 1.0 + r;
    c[i] = -0.5 * r;
  }
  c[0] = -r;
  a[nx - 1] = -r;
  for (int step = 1; step < nt; ++step) {
    logistic(0.5 * dt);
    rhs[0] = u[0] + r * (u[1] - u[0]);
    rhs[nx - 1] = u[nx - 1] + r * (u[nx - 2] - u[nx - 1]);
    for (int i = 1; i < nx - 1; ++i) rhs[i] = u[i] + 0.5 * r * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
    detail::solve_tridiagonal(a, b, c, rhs);
    u = rhs;
    logistic(0.5 * dt);
    for (int i = 0; i < nx; ++i) {
      if (!std::isfinite(u[i])) throw StabilityError("non-finite state at step " + std::to_string(step));
      g(step, i) = u[i];
    }
  }
  return g;
}

/// Trapezoidal integral of one time slice of a 1D grid.
inline double trapezoid_mass(const SolutionGrid& g, std::size_t it) {
  const auto& x = g.x(0);
  double m = 0.0;
  for (size_t i = 0; i + 1 < x.size(); ++i) m += 0.5 * (x[i + 1] - x[i]) * (g(it, i) + g(it, i + 1));
  return m;
}

/// Closed-form solution tabulated on a product grid.
inline SolutionGrid analytic_grid(const Problem& pb, std::span<const double> c, const std::vector<double>& t,
                                  const std::vector<std::vector<double>>& x) {
  if (!pb.has_exact()) throw UnsupportedError("problem '" + pb.name() + "' has no closed-form solution");
  SolutionGrid g(t, x, pb.dim_u(), "analytic");
  for (int k = 0; k < pb.layout().dim_c; ++k) g.params()[pb.c_names()[k]] = c[k];
  for (size_t it = 0; it < t.size(); ++it) {
    for (size_t s = 0; s < g.space_nodes(); ++s) {
      const auto xs = g.space_coords(s);
      for (int comp = 0; comp < pb.dim_u(); ++comp) g(it, s, comp) = pb.exact(t[it], xs, c, comp);
    }
  }
  return g;
}

}  // namespace cdpinn
