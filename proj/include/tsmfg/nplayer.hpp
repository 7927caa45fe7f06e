#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tsmfg/cost.hpp"
#include "tsmfg/errors.hpp"
#include "tsmfg/hamiltonian.hpp"

namespace tsmfg {

inline std::vector<double> uniform_time_grid(double horizon, std::size_t steps) {
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  }
  grid[steps] = horizon;
  return grid;
}

// Equilibrium value functions u_n(i, t_k) of the N+1 player game on a
// uniform time grid. Immutable once built.
class NPlayerSolution {
 public:
  NPlayerSolution(int players, std::vector<double> time_grid, std::vector<double> values,
                  std::uint64_t spec_fingerprint)
      : players_(players),
        time_grid_(std::move(time_grid)),
        values_(std::move(values)),
        fingerprint_(spec_fingerprint) {}

  int players() const noexcept { return players_; }
  std::size_t steps() const noexcept { return time_grid_.size() - 1; }
  double horizon() const noexcept { return time_grid_.back(); }
  const std::vector<double>& time_grid() const noexcept { return time_grid_; }
  std::uint64_t spec_fingerprint() const noexcept { return fingerprint_; }

  double u(int i, int n, std::size_t k) const noexcept {
    return values_[slice_offset(k) + static_cast<std::size_t>(i) * stride() + static_cast<std::size_t>(n)];
  }

  // Layout of one time slice: [u(0,0..N), u(1,0..N)].
  std::span<const double> slice(std::size_t k) const noexcept {
    return {values_.data() + slice_offset(k), 2 * stride()};
  }

  // Cell index and weight of t for linear interpolation.
  std::pair<std::size_t, double> locate(double t) const noexcept {
    const std::size_t K = steps();
    const double step = horizon() / static_cast<double>(K);
    double pos = t / step;
    if (!(pos > 0.0)) return {0, 0.0};
    if (pos >= static_cast<double>(K)) return {K - 1, 1.0};
    auto k = static_cast<std::size_t>(pos);
    if (k >= K) k = K - 1;
    return {k, pos - static_cast<double>(k)};
  }

  double interpolate(int i, int n, double t) const noexcept {
    const auto [k, w] = locate(t);
    return (1.0 - w) * u(i, n, k) + w * u(i, n, k + 1);
  }

 private:
  std::size_t stride() const noexcept { return static_cast<std::size_t>(players_) + 1; }
  std::size_t slice_offset(std::size_t k) const noexcept { return k * 2 * stride(); }

  int players_;
  std::vector<double> time_grid_;
  std::vector<double> values_;
  std::uint64_t fingerprint_;
};

struct TransitionRates {
  double up = 0.0;    // n -> n+1
  double down = 0.0;  // n -> n-1
};

namespace detail {

// Right-hand side of the equilibrium system in reversed time tau = T - t:
//   du_n/dtau = gamma+_n (u_{n+1} - u_n) + gamma-_n (u_{n-1} - u_n) + h(ubar_n - u_n, n/N, i)
// with gamma+_n(i) = (N-n) alpha*(u(0,m) - u(1,m), m/N, 1), m = n+1-i,
//      gamma-_n(i) = n alpha*(u(1,m) - u(0,m), m/N, 0),     m = n-i.
class EquilibriumRhs {
 public:
  EquilibriumRhs(const CostSpec& spec, int players)
      : spec_(spec), players_(players), points_(2 * (static_cast<std::size_t>(players) + 1)) {}

  // Fills the per-node Hamiltonian values and optimal rates of `state`.
  void evaluate_points(std::span<const double> state) {
    const std::size_t stride = static_cast<std::size_t>(players_) + 1;
    for (int n = 0; n <= players_; ++n) {
      const double theta = static_cast<double>(n) / players_;
      const double u0 = state[static_cast<std::size_t>(n)];
      const double u1 = state[stride + static_cast<std::size_t>(n)];
      points_[static_cast<std::size_t>(n)] = detail::evaluate(spec_, u1 - u0, theta, 0);
      points_[stride + static_cast<std::size_t>(n)] = detail::evaluate(spec_, u0 - u1, theta, 1);
    }
  }

  // Rates for a reference player in state i with n others in state 0.
  // Requires evaluate_points() on the same state.
  TransitionRates rates(int i, int n) const {
    const std::size_t stride = static_cast<std::size_t>(players_) + 1;
    TransitionRates r;
    if (n < players_) {
      r.up = (players_ - n) * points_[stride + static_cast<std::size_t>(n + 1 - i)].rate;
    }
    if (n > 0) {
      r.down = n * points_[static_cast<std::size_t>(n - i)].rate;
    }
    return r;
  }

  double max_rate() const {
    double m = 0.0;
    for (const auto& p : points_) m = std::max(m, p.rate);
    return m;
  }

  void operator()(std::span<const double> state, std::span<double> out) {
    evaluate_points(state);
    const std::size_t stride = static_cast<std::size_t>(players_) + 1;
    for (int i = 0; i < 2; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * stride;
      for (int n = 0; n <= players_; ++n) {
        const std::size_t idx = base + static_cast<std::size_t>(n);
        const TransitionRates r = rates(i, n);
        double d = points_[idx].value;
        if (r.up != 0.0) d += r.up * (state[idx + 1] - state[idx]);
        if (r.down != 0.0) d += r.down * (state[idx - 1] - state[idx]);
        out[idx] = d;
      }
    }
  }

 private:
  const CostSpec& spec_;
  int players_;
  std::vector<HamiltonianPoint> points_;
};

// One classical RK4 step of size h for an autonomous system.
template <class Rhs>
void rk4_step(Rhs& rhs, std::span<double> y, double h, std::vector<double>& scratch) {
  const std::size_t dim = y.size();
  scratch.resize(5 * dim);
  std::span<double> k1(scratch.data(), dim);
  std::span<double> k2(scratch.data() + dim, dim);
  std::span<double> k3(scratch.data() + 2 * dim, dim);
  std::span<double> k4(scratch.data() + 3 * dim, dim);
  std::span<double> tmp(scratch.data() + 4 * dim, dim);

  rhs(std::span<const double>(y), k1);
  for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
  rhs(std::span<const double>(tmp), k2);
  for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
  rhs(std::span<const double>(tmp), k3);
  for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + h * k3[j];
  rhs(std::span<const double>(tmp), k4);
  for (std::size_t j = 0; j < dim; ++j) {
    y[j] += h * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]) / 6.0;
  }
}

// M = max |h(0, n/N, i)| over the theta lattice.
inline double hamiltonian_at_zero_bound(const CostSpec& spec, int players) {
  double m = 0.0;
  for (int n = 0; n <= players; ++n) {
    const double theta = static_cast<double>(n) / players;
    for (int i = 0; i < 2; ++i) m = std::max(m, std::abs(detail::evaluate(spec, 0.0, theta, i).value));
  }
  return m;
}

inline double terminal_sup_norm(const CostSpec& spec, int players) {
  double m = 0.0;
  for (int n = 0; n <= players; ++n) {
    const double theta = static_cast<double>(n) / players;
    for (int i = 0; i < 2; ++i) m = std::max(m, std::abs(spec.terminal_cost(i, theta)));
  }
  return m;
}

}  // namespace detail

struct NPlayerOptions {
  int steps = 200;
  // Step is capped at stability_factor / (N R), R an a-priori rate bound.
  double stability_factor = 0.1;
  // Allowed excess over the max-principle envelope before aborting.
  double instability_margin = 1e-3;
};

/// Solves the N+1 player equilibrium system backward from u(i,n,T) = psi(i, n/N)
/// with fixed-step RK4. The number of steps is max(options.steps, ceil(T N R / 0.1)).
inline NPlayerSolution solve_nplayer(const CostSpec& spec, int players, const NPlayerOptions& options = {}) {
  spec.validate();
  if (players < 1) throw DomainError("N must be at least 1");
  if (options.steps < 1) throw DomainError("steps must be at least 1");

  const double T = spec.horizon;
  const double M = detail::hamiltonian_at_zero_bound(spec, players);
  const double psi_norm = detail::terminal_sup_norm(spec, players);
  const double envelope = psi_norm + 2.0 * M * T;

  // alpha* is nonincreasing in p, and |p| <= 2 * envelope.
  double rate_bound = 0.0;
  for (int n = 0; n <= players; ++n) {
    const double theta = static_cast<double>(n) / players;
    for (int i = 0; i < 2; ++i) {
      rate_bound = std::max(rate_bound, detail::evaluate(spec, -2.0 * envelope, theta, i).rate);
    }
  }

  std::size_t K = static_cast<std::size_t>(options.steps);
  if (rate_bound > 0.0) {
    const double needed = std::ceil(T * players * rate_bound / options.stability_factor);
    K = std::max(K, static_cast<std::size_t>(needed));
  }
  const double h = T / static_cast<double>(K);

  const std::size_t stride = static_cast<std::size_t>(players) + 1;
  const std::size_t dim = 2 * stride;
  std::vector<double> values((K + 1) * dim);

  std::vector<double> state(dim);
  for (int i = 0; i < 2; ++i) {
    for (int n = 0; n <= players; ++n) {
      state[static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(n)] =
          spec.terminal_cost(i, static_cast<double>(n) / players);
    }
  }
  std::copy(state.begin(), state.end(), values.begin() + static_cast<std::ptrdiff_t>(K * dim));

  detail::EquilibriumRhs rhs(spec, players);
  std::vector<double> scratch;
  for (std::size_t step = 0; step < K; ++step) {
    detail::rk4_step(rhs, std::span<double>(state), h, scratch);
    const std::size_t k = K - step - 1;
    const double elapsed = T - static_cast<double>(k) * h;
    const double allowed = psi_norm + 2.0 * M * elapsed + options.instability_margin;
    for (double v : state) {
      if (!(std::abs(v) <= allowed)) {
        throw InstabilityError("N-player integration left the max-principle envelope at t = " +
                               std::to_string(static_cast<double>(k) * h) + "; refine the time grid");
      }
    }
    std::copy(state.begin(), state.end(), values.begin() + static_cast<std::ptrdiff_t>(k * dim));
  }

  return NPlayerSolution(players, uniform_time_grid(T, K), std::move(values), spec.fingerprint());
}

inline NPlayerSolution solve_nplayer(const CostSpec& spec, int players, int steps) {
  NPlayerOptions options;
  options.steps = steps;
  return solve_nplayer(spec, players, options);
}

/// gamma+- at a grid node of a solved system.
inline TransitionRates transition_rates(const CostSpec& spec, const NPlayerSolution& sol, int i, int n,
                                        std::size_t k) {
  require_state(i);
  if (n < 0 || n > sol.players()) throw DomainError("n outside 0..N");
  detail::EquilibriumRhs rhs(spec, sol.players());
  rhs.evaluate_points(sol.slice(k));
  return rhs.rates(i, n);
}

// Equilibrium Markov control beta*(i, n, t) = alpha*(ubar_n - u_n, n/N, i),
// with u linearly interpolated in time.
class EquilibriumControl {
 public:
  EquilibriumControl(std::shared_ptr<const NPlayerSolution> sol, CostSpec spec)
      : sol_(std::move(sol)), spec_(std::move(spec)) {
    if (sol_->spec_fingerprint() != spec_.fingerprint()) {
      throw IncompatibleError("solution was computed for a different model");
    }
    for (std::size_t k = 0; k <= sol_->steps(); ++k) {
      for (int i = 0; i < 2; ++i) {
        for (int n = 0; n <= sol_->players(); ++n) {
          const double p = sol_->u(1 - i, n, k) - sol_->u(i, n, k);
          max_node_rate_ = std::max(max_node_rate_, detail::evaluate(spec_, p, theta_of(n), i).rate);
        }
      }
    }
  }

  int players() const noexcept { return sol_->players(); }
  double horizon() const noexcept { return sol_->horizon(); }
  const NPlayerSolution& solution() const noexcept { return *sol_; }
  const CostSpec& spec() const noexcept { return spec_; }

  // Switching rate of a player in state i seeing n others in state 0.
  double rate(int i, int n, double t) const {
    const auto [k, w] = sol_->locate(t);
    const double p0 = sol_->u(1 - i, n, k) - sol_->u(i, n, k);
    const double p1 = sol_->u(1 - i, n, k + 1) - sol_->u(i, n, k + 1);
    return detail::evaluate(spec_, (1.0 - w) * p0 + w * p1, theta_of(n), i).rate;
  }

  // alpha* is monotone in p, so along a linearly interpolated p the rate is
  // extremal at grid nodes; this is therefore a bound for all t.
  double max_node_rate() const noexcept { return max_node_rate_; }

 private:
  double theta_of(int n) const noexcept { return static_cast<double>(n) / sol_->players(); }

  std::shared_ptr<const NPlayerSolution> sol_;
  CostSpec spec_;
  double max_node_rate_ = 0.0;
};

inline EquilibriumControl equilibrium_control(const NPlayerSolution& sol, const CostSpec& spec) {
  return EquilibriumControl(std::make_shared<const NPlayerSolution>(sol), spec);
}

struct MaxPrincipleReport {
  double bound = 0.0;         // ||u(T)|| + 2 M T, the envelope at t = 0
  double max_observed = 0.0;  // max |u| over the grid
  double worst_excess = 0.0;  // max over nodes of |u| - envelope(t_k)
  bool pass = false;
};

inline constexpr double kMaxPrincipleSlack = 1e-6;

inline MaxPrincipleReport check_max_principle(const NPlayerSolution& sol, const CostSpec& spec) {
  const int N = sol.players();
  const std::size_t K = sol.steps();
  const double M = detail::hamiltonian_at_zero_bound(spec, N);
  double terminal = 0.0;
  for (double v : sol.slice(K)) terminal = std::max(terminal, std::abs(v));

  MaxPrincipleReport report;
  report.bound = terminal + 2.0 * M * sol.horizon();
  report.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= K; ++k) {
    const double envelope = terminal + 2.0 * M * (sol.horizon() - sol.time_grid()[k]);
    for (double v : sol.slice(k)) {
      report.max_observed = std::max(report.max_observed, std::abs(v));
      report.worst_excess = std::max(report.worst_excess, std::abs(v) - envelope);
    }
  }
  report.pass = report.worst_excess <= kMaxPrincipleSlack;
  return report;
}

struct GradientBoundReport {
  double bound = 0.0;           // 2C/N
  double max_difference = 0.0;  // max |u(i,n+1,k) - u(i,n,k)|
  double valid_horizon = 0.0;   // largest T' such that the bound holds on [T - T', T]
  bool pass = false;
};

inline double max_neighbor_difference(const NPlayerSolution& sol, std::size_t k) {
  double m = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int n = 0; n < sol.players(); ++n) m = std::max(m, std::abs(sol.u(i, n + 1, k) - sol.u(i, n, k)));
  }
  return m;
}

/// Checks max |u_{n+1} - u_n| <= 2C/N given a terminal slice within C/N.
inline GradientBoundReport check_gradient_bound(const NPlayerSolution& sol, double C) {
  if (!(C > 0.0)) throw DomainError("C must be positive");
  const double N = sol.players();
  const std::size_t K = sol.steps();
  const double terminal = max_neighbor_difference(sol, K);
  if (terminal > (C / N) * (1.0 + 1e-12)) {
    throw PreconditionError("terminal differences exceed C/N");
  }

  GradientBoundReport report;
  report.bound = 2.0 * C / N;
  const double limit = report.bound + 1e-9;
  report.valid_horizon = sol.horizon();
  bool broken = false;
  for (std::size_t step = 0; step <= K; ++step) {
    const std::size_t k = K - step;
    const double diff = max_neighbor_difference(sol, k);
    report.max_difference = std::max(report.max_difference, diff);
    if (!broken && diff > limit) {
      broken = true;
      report.valid_horizon = sol.horizon() - sol.time_grid()[k + 1];
    }
  }
  report.pass = !broken;
  return report;
}

}  // namespace tsmfg
