#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsmfg/cost.hpp"
#include "tsmfg/errors.hpp"
#include "tsmfg/hamiltonian.hpp"
#include "tsmfg/nplayer.hpp"

namespace tsmfg {

using ValuePaths = std::array<std::vector<double>, 2>;

namespace detail {

// Value at t_{k+1/2} of a function sampled on a uniform grid, by the cubic
// through the four nearest nodes (linear when fewer than four exist).
inline double cubic_midpoint(std::span<const double> v, std::size_t k) {
  const std::size_t K = v.size() - 1;
  if (K < 3) return 0.5 * (v[k] + v[k + 1]);
  if (k == 0) return (5.0 * v[0] + 15.0 * v[1] - 5.0 * v[2] + v[3]) / 16.0;
  if (k == K - 1) return (v[K - 3] - 5.0 * v[K - 2] + 15.0 * v[K - 1] + 5.0 * v[K]) / 16.0;
  return (-v[k - 1] + 9.0 * v[k] + 9.0 * v[k + 1] - v[k + 2]) / 16.0;
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// (1 - theta) beta1 - theta beta0
inline double population_drift(double theta, double beta0, double beta1) {
  return (1.0 - theta) * beta1 - theta * beta0;
}

inline void require_path(std::span<const double> path, const char* what) {
  if (path.size() < 2) throw DomainError(std::string(what) + " needs at least two grid points");
}

}  // namespace detail

/// Backward RK4 solve of -du_i/dt = h(u_{1-i} - u_i, theta(t), i), u_i(T) = psi(i, theta(T)),
/// on the uniform grid implied by the path length and the horizon.
inline ValuePaths solve_hj_given_theta(const CostSpec& spec, std::span<const double> theta_path) {
  spec.validate();
  detail::require_path(theta_path, "theta path");
  for (double th : theta_path) require_unit_interval(th, "theta path value");

  const std::size_t K = theta_path.size() - 1;
  const double T = spec.horizon;
  const double h = T / static_cast<double>(K);

  double M = 0.0;
  for (double th : theta_path) {
    for (int i = 0; i < 2; ++i) M = std::max(M, std::abs(detail::evaluate(spec, 0.0, th, i).value));
  }

  ValuePaths u{std::vector<double>(K + 1), std::vector<double>(K + 1)};
  u[0][K] = spec.terminal_cost(0, theta_path[K]);
  u[1][K] = spec.terminal_cost(1, theta_path[K]);
  const double psi_norm = std::max(std::abs(u[0][K]), std::abs(u[1][K]));

  auto rhs = [&spec](double a0, double a1, double th, double& d0, double& d1) {
    d0 = detail::evaluate(spec, a1 - a0, th, 0).value;
    d1 = detail::evaluate(spec, a0 - a1, th, 1).value;
  };

  double y0 = u[0][K];
  double y1 = u[1][K];
  for (std::size_t step = 0; step < K; ++step) {
    const std::size_t k = K - step - 1;
    const double th_start = theta_path[k + 1];
    const double th_mid = std::clamp(detail::cubic_midpoint(theta_path, k), 0.0, 1.0);
    const double th_end = theta_path[k];

    double k10, k11, k20, k21, k30, k31, k40, k41;
    rhs(y0, y1, th_start, k10, k11);
    rhs(y0 + 0.5 * h * k10, y1 + 0.5 * h * k11, th_mid, k20, k21);
    rhs(y0 + 0.5 * h * k20, y1 + 0.5 * h * k21, th_mid, k30, k31);
    rhs(y0 + h * k30, y1 + h * k31, th_end, k40, k41);
    y0 += h * (k10 + 2.0 * (k20 + k30) + k40) / 6.0;
    y1 += h * (k11 + 2.0 * (k21 + k31) + k41) / 6.0;

    const double allowed = psi_norm + 2.0 * M * (T - static_cast<double>(k) * h) + 1e-3;
    if (!(std::abs(y0) <= allowed && std::abs(y1) <= allowed)) {
      throw InstabilityError("mean field HJ integration left the max-principle envelope");
    }
    u[0][k] = y0;
    u[1][k] = y1;
  }
  return u;
}

/// Forward RK4 solve of d theta/dt = (1 - theta) beta1 - theta beta0, theta(0) = theta_bar.
inline std::vector<double> solve_theta_given_control(std::span<const double> beta0, std::span<const double> beta1,
                                                     double theta_bar, double horizon) {
  detail::require_path(beta0, "beta0");
  if (beta0.size() != beta1.size()) throw DomainError("beta0 and beta1 must share one grid");
  require_unit_interval(theta_bar, "theta_bar");
  if (!(horizon > 0.0)) throw DomainError("T must be positive");
  for (std::size_t k = 0; k < beta0.size(); ++k) {
    if (!(beta0[k] >= 0.0) || !(beta1[k] >= 0.0)) throw DomainError("switching rates must be nonnegative");
  }

  const std::size_t K = beta0.size() - 1;
  const double h = horizon / static_cast<double>(K);
  std::vector<double> theta(K + 1);
  theta[0] = theta_bar;
  double y = theta_bar;
  for (std::size_t k = 0; k < K; ++k) {
    const double b0_mid = std::max(0.0, detail::cubic_midpoint(beta0, k));
    const double b1_mid = std::max(0.0, detail::cubic_midpoint(beta1, k));
    const double k1 = detail::population_drift(y, beta0[k], beta1[k]);
    const double k2 = detail::population_drift(y + 0.5 * h * k1, b0_mid, b1_mid);
    const double k3 = detail::population_drift(y + 0.5 * h * k2, b0_mid, b1_mid);
    const double k4 = detail::population_drift(y + h * k3, beta0[k + 1], beta1[k + 1]);
    y += h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0;
    y = std::clamp(y, 0.0, 1.0);
    theta[k + 1] = y;
  }
  return theta;
}

/// beta_i(t_k) = alpha*(u_{1-i} - u_i, theta_k, i) along a solved value path.
inline std::array<std::vector<double>, 2> mean_field_controls(const CostSpec& spec, std::span<const double> theta,
                                                              const ValuePaths& u) {
  const std::size_t n = theta.size();
  std::array<std::vector<double>, 2> beta{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    beta[0][k] = detail::evaluate(spec, u[1][k] - u[0][k], theta[k], 0).rate;
    beta[1][k] = detail::evaluate(spec, u[0][k] - u[1][k], theta[k], 1).rate;
  }
  return beta;
}

/// Best-response population path: theta -> u^theta -> beta^theta -> new theta.
inline std::vector<double> xi_operator(const CostSpec& spec, std::span<const double> theta_path, double theta_bar) {
  const ValuePaths u = solve_hj_given_theta(spec, theta_path);
  const auto beta = mean_field_controls(spec, theta_path, u);
  return solve_theta_given_control(beta[0], beta[1], theta_bar, spec.horizon);
}

struct FixedPointConfig {
  double damping = 0.5;
  double tolerance = 1e-9;
  int max_iterations = 500;
  int steps = 1000;
  // Starting population path on the solve grid; constant theta_bar when empty.
  std::optional<std::vector<double>> initial_path;

  void validate() const {
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("damping must lie in (0,1]");
    if (!(tolerance > 0.0)) throw DomainError("tol must be positive");
    if (max_iterations < 1) throw DomainError("max_iterations must be at least 1");
    if (steps < 1) throw DomainError("steps must be at least 1");
  }
};

struct MeanFieldSolution {
  std::vector<double> time_grid;
  std::vector<double> theta;
  ValuePaths u;
  int iterations = 0;
  double residual = 0.0;
  // Max trapezoid defect of each ODE over the grid cells.
  double defect_theta = 0.0;
  double defect_u = 0.0;
  std::uint64_t spec_fingerprint = 0;

  double horizon() const noexcept { return time_grid.back(); }

  double interpolate_theta(double t) const noexcept { return interpolate(theta, t); }
  double interpolate_u(int i, double t) const noexcept { return interpolate(u[static_cast<std::size_t>(i)], t); }

 private:
  double interpolate(const std::vector<double>& v, double t) const noexcept {
    const std::size_t K = time_grid.size() - 1;
    const double pos = t / horizon() * static_cast<double>(K);
    if (!(pos > 0.0)) return v.front();
    if (pos >= static_cast<double>(K)) return v.back();
    const auto k = std::min(static_cast<std::size_t>(pos), K - 1);
    const double w = pos - static_cast<double>(k);
    return (1.0 - w) * v[k] + w * v[k + 1];
  }
};

namespace detail {

inline void fill_defects(const CostSpec& spec, MeanFieldSolution& sol) {
  const std::size_t K = sol.theta.size() - 1;
  const double h = sol.horizon() / static_cast<double>(K);
  std::vector<double> drift(K + 1);
  ValuePaths ham{std::vector<double>(K + 1), std::vector<double>(K + 1)};
  for (std::size_t k = 0; k <= K; ++k) {
    const double th = sol.theta[k];
    const double u0 = sol.u[0][k];
    const double u1 = sol.u[1][k];
    const HamiltonianPoint p0 = evaluate(spec, u1 - u0, th, 0);
    const HamiltonianPoint p1 = evaluate(spec, u0 - u1, th, 1);
    drift[k] = population_drift(th, p0.rate, p1.rate);
    ham[0][k] = p0.value;
    ham[1][k] = p1.value;
  }
  sol.defect_theta = 0.0;
  sol.defect_u = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double dtheta = (sol.theta[k + 1] - sol.theta[k]) / h - 0.5 * (drift[k] + drift[k + 1]);
    sol.defect_theta = std::max(sol.defect_theta, std::abs(dtheta));
    for (std::size_t i = 0; i < 2; ++i) {
      const double du = (sol.u[i][k + 1] - sol.u[i][k]) / h + 0.5 * (ham[i][k] + ham[i][k + 1]);
      sol.defect_u = std::max(sol.defect_u, std::abs(du));
    }
  }
}

}  // namespace detail

/// Solves the initial-terminal mean field system by damped Picard iteration
/// theta <- (1 - lambda) theta + lambda xi(theta). On convergence the returned
/// path is xi of the last iterate, so theta(0) = theta_bar exactly, and u is
/// the HJ solution for that path, so u(i,T) = psi(i, theta(T)) exactly.
inline MeanFieldSolution solve_mfg(const CostSpec& spec, double theta_bar, const FixedPointConfig& fp = {}) {
  spec.validate();
  fp.validate();
  require_unit_interval(theta_bar, "theta_bar");

  const auto K = static_cast<std::size_t>(fp.steps);
  std::vector<double> theta(K + 1, theta_bar);
  if (fp.initial_path) {
    if (fp.initial_path->size() != K + 1) throw DomainError("initial path must have steps + 1 points");
    for (double th : *fp.initial_path) require_unit_interval(th, "initial path value");
    theta = *fp.initial_path;
  }

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= fp.max_iterations; ++it) {
    std::vector<double> image = xi_operator(spec, theta, theta_bar);
    residual = fp.damping * detail::sup_distance(image, theta);
    if (residual < fp.tolerance) {
      MeanFieldSolution sol;
      sol.time_grid = uniform_time_grid(spec.horizon, K);
      sol.theta = std::move(image);
      sol.u = solve_hj_given_theta(spec, sol.theta);
      sol.iterations = it;
      sol.residual = residual;
      sol.spec_fingerprint = spec.fingerprint();
      detail::fill_defects(spec, sol);
      return sol;
    }
    for (std::size_t k = 0; k <= K; ++k) {
      theta[k] = (1.0 - fp.damping) * theta[k] + fp.damping * image[k];
    }
  }
  throw ConvergenceError("mean field fixed point did not converge; last update " + std::to_string(residual) +
                             " (try smaller damping or horizon)",
                         residual, fp.max_iterations);
}

struct PsiMonotonicityReport {
  bool pass = false;
  double worst_value = 0.0;  // min over pairs of the monotonicity expression
  double worst_x = 0.0;
  double worst_y = 0.0;
};

/// (x - y)[psi(0,x) - psi(0,y)] + (y - x)[psi(1,x) - psi(1,y)] >= 0 over grid pairs.
inline PsiMonotonicityReport check_monotonicity_psi(const CostSpec& spec, int grid_points) {
  if (grid_points < 2) throw DomainError("grid_points must be at least 2");
  PsiMonotonicityReport report;
  report.worst_value = std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid_points; ++a) {
    const double x = static_cast<double>(a) / (grid_points - 1);
    for (int b = 0; b < grid_points; ++b) {
      const double y = static_cast<double>(b) / (grid_points - 1);
      const double e = (x - y) * (spec.psi[0](x) - spec.psi[0](y)) + (y - x) * (spec.psi[1](x) - spec.psi[1](y));
      if (e < report.worst_value) {
        report.worst_value = e;
        report.worst_x = x;
        report.worst_y = y;
      }
    }
  }
  report.pass = report.worst_value >= -1e-12;
  return report;
}

struct CostMonotonicityReport {
  bool pass = false;
  double gamma = 0.0;  // largest gamma with expression <= -gamma |x - y|^2 on the grid
  double worst_x = 0.0;
  double worst_y = 0.0;
};

/// Separable monotonicity of the running cost: for the quadratic family with
/// constant g, h(p, theta, i) = h0(p) + f(i, theta) and uniqueness needs
/// (x - y)(f(0,y) - f(0,x)) + (y - x)(f(1,y) - f(1,x)) <= -gamma |x - y|^2.
inline CostMonotonicityReport check_monotonicity_f(const CostSpec& spec, int grid_points) {
  if (spec.kind != CostKind::Quadratic || !spec.g[0].is_constant() || !spec.g[1].is_constant()) {
    throw PreconditionError("cost monotonicity check needs the quadratic family with constant g");
  }
  if (grid_points < 2) throw DomainError("grid_points must be at least 2");
  double gamma = std::numeric_limits<double>::infinity();
  CostMonotonicityReport report;
  for (int a = 0; a < grid_points; ++a) {
    const double x = static_cast<double>(a) / (grid_points - 1);
    for (int b = 0; b < grid_points; ++b) {
      if (a == b) continue;
      const double y = static_cast<double>(b) / (grid_points - 1);
      const double e = (x - y) * (spec.f[0](y) - spec.f[0](x)) + (y - x) * (spec.f[1](y) - spec.f[1](x));
      const double ratio = -e / ((x - y) * (x - y));
      if (ratio < gamma) {
        gamma = ratio;
        report.worst_x = x;
        report.worst_y = y;
      }
    }
  }
  report.gamma = std::max(gamma, 0.0);
  report.pass = report.gamma > 0.0;
  return report;
}

}  // namespace tsmfg
