#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tsmfg/cost.hpp"
#include "tsmfg/errors.hpp"
#include "tsmfg/meanfield.hpp"
#include "tsmfg/nplayer.hpp"
#include "tsmfg/rng.hpp"

namespace tsmfg {

struct ChainState {
  int i = 0;  // reference player's state
  int n = 0;  // number of other players in state 0

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

// One realized path of (i(t), n(t)) on [start_time, horizon].
struct TrajectorySample {
  int players = 0;
  double start_time = 0.0;
  double horizon = 0.0;
  ChainState initial;
  std::vector<double> jump_times;
  std::vector<ChainState> states;  // state right after each jump

  ChainState at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return initial;
    return states[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }

  ChainState final_state() const { return states.empty() ? initial : states.back(); }
};

// A Markov switching control that the simulator can drive.
template <class C>
concept SwitchingControl = requires(const C& c, int i, int n, double t) {
  { c.rate(i, n, t) } -> std::convertible_to<double>;
  { c.max_node_rate() } -> std::convertible_to<double>;
  { c.horizon() } -> std::convertible_to<double>;
};

// Every player switches at the same constant rate.
struct ConstantRateControl {
  double alpha = 0.0;
  double T = 1.0;

  double rate(int, int, double) const noexcept { return alpha; }
  double max_node_rate() const noexcept { return alpha; }
  double horizon() const noexcept { return T; }
};

struct SimConfig {
  int players = 1;
  int trials = 1;
  std::uint64_t master_seed = 0;
  std::vector<double> sample_times;
  double theta_bar = 0.5;
  // Dominating clock rate is (N+1) * rate_safety * max node rate.
  double rate_safety = 1.05;

  void validate(double horizon) const {
    if (players < 0) throw DomainError("N must be nonnegative");
    if (trials < 1) throw DomainError("trials must be at least 1");
    require_unit_interval(theta_bar, "theta_bar");
    if (!(rate_safety >= 1.0)) throw DomainError("rate_safety must be at least 1");
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
      if (!(sample_times[k] >= 0.0 && sample_times[k] <= horizon)) {
        throw DomainError("sample times must lie in [0,T]");
      }
      if (k > 0 && !(sample_times[k] > sample_times[k - 1])) {
        throw DomainError("sample times must be increasing");
      }
    }
  }
};

inline std::vector<double> uniform_sample_times(double horizon, int count) {
  if (count < 2) throw DomainError("need at least two sample times");
  return uniform_time_grid(horizon, static_cast<std::size_t>(count - 1));
}

/// A phi(i,n) = alpha (phi(1-i,n) - phi(i,n)) + gamma+ (phi(i,n+1) - phi(i,n)) + gamma- (phi(i,n-1) - phi(i,n)).
template <class Phi>
double apply_generator(Phi&& phi, int players, double alpha, TransitionRates rates, int i, int n) {
  require_state(i);
  if (n < 0 || n > players) throw std::out_of_range("n outside 0..N");
  if (n == 0 && rates.down != 0.0) throw DomainError("gamma- must vanish at n = 0");
  if (n == players && rates.up != 0.0) throw DomainError("gamma+ must vanish at n = N");
  const double here = phi(i, n);
  double out = alpha * (phi(1 - i, n) - here);
  if (n < players) out += rates.up * (phi(i, n + 1) - here);
  if (n > 0) out += rates.down * (phi(i, n - 1) - here);
  return out;
}

/// Rates of the three possible moves from `s` when every player uses `control`.
template <SwitchingControl Control>
std::array<double, 3> move_rates(const Control& control, int players, ChainState s, double t) {
  const double flip = control.rate(s.i, s.n, t);
  const double up = s.n < players ? (players - s.n) * control.rate(1, s.n + 1 - s.i, t) : 0.0;
  const double down = s.n > 0 ? s.n * control.rate(0, s.n - s.i, t) : 0.0;
  return {flip, up, down};
}

/// Exact simulation by uniformization from a given state at time t0.
template <SwitchingControl Control>
TrajectorySample simulate_from(const Control& control, int players, ChainState start, double t0, CounterRng& rng,
                               double rate_safety = 1.05) {
  TrajectorySample path;
  path.players = players;
  path.start_time = t0;
  path.horizon = control.horizon();
  path.initial = start;

  const double clock = (players + 1) * rate_safety * control.max_node_rate();
  if (!(clock > 0.0)) return path;

  ChainState s = start;
  double t = t0;
  for (;;) {
    t += rng.exponential(clock);
    if (t > path.horizon) break;
    const auto r = move_rates(control, players, s, t);
    const double total = r[0] + r[1] + r[2];
    if (total > clock * (1.0 + 1e-12)) {
      throw Error("instantaneous switching rate " + std::to_string(total) + " exceeds the uniformization bound " +
                  std::to_string(clock));
    }
    const double pick = rng.uniform() * clock;
    if (pick < r[0]) {
      s.i = 1 - s.i;
    } else if (pick < r[0] + r[1]) {
      ++s.n;
    } else if (pick < total) {
      --s.n;
    } else {
      continue;  // fictitious event
    }
    path.jump_times.push_back(t);
    path.states.push_back(s);
  }
  return path;
}

/// One trial: n(0) ~ Binomial(N, theta_bar), reference player in state 0 with
/// probability theta_bar, then uniformized dynamics on [0, T].
template <SwitchingControl Control>
TrajectorySample simulate_chain(const Control& control, const SimConfig& cfg, std::uint64_t trial) {
  CounterRng rng(cfg.master_seed, trial);
  ChainState start;
  start.i = rng.bernoulli(cfg.theta_bar) ? 0 : 1;
  for (int k = 0; k < cfg.players; ++k) start.n += rng.bernoulli(cfg.theta_bar) ? 1 : 0;
  return simulate_from(control, cfg.players, start, 0.0, rng, cfg.rate_safety);
}

/// Integral of fn(i, n, s) along a path, Simpson's rule on every piece of
/// constant state further split at `breaks` (e.g. the control's time grid).
template <class F>
double integrate_path(const TrajectorySample& path, std::span<const double> breaks, F&& fn) {
  double total = 0.0;
  auto piece = [&](ChainState s, double a, double b) {
    if (!(b > a)) return;
    auto lo = std::upper_bound(breaks.begin(), breaks.end(), a);
    double left = a;
    for (auto it = lo; it != breaks.end() && *it < b; ++it) {
      const double right = *it;
      total += (right - left) / 6.0 * (fn(s.i, s.n, left) + 4.0 * fn(s.i, s.n, 0.5 * (left + right)) + fn(s.i, s.n, right));
      left = right;
    }
    total += (b - left) / 6.0 * (fn(s.i, s.n, left) + 4.0 * fn(s.i, s.n, 0.5 * (left + b)) + fn(s.i, s.n, b));
  };
  ChainState s = path.initial;
  double from = path.start_time;
  for (std::size_t j = 0; j < path.jump_times.size(); ++j) {
    piece(s, from, path.jump_times[j]);
    s = path.states[j];
    from = path.jump_times[j];
  }
  piece(s, from, path.horizon);
  return total;
}

// Neumaier-compensated running sums of x and x^2.
class MomentAccumulator {
 public:
  void add(double x) noexcept {
    add_compensated(sum_, comp_, x);
    add_compensated(sum_sq_, comp_sq_, x * x);
    ++count_;
  }

  double mean() const noexcept { return count_ ? (sum_ + comp_) / static_cast<double>(count_) : 0.0; }

  double standard_error() const noexcept {
    if (count_ < 2) return 0.0;
    const double n = static_cast<double>(count_);
    const double m = mean();
    const double var = std::max(0.0, ((sum_sq_ + comp_sq_) - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }

  std::size_t count() const noexcept { return count_; }

 private:
  static void add_compensated(double& sum, double& comp, double x) noexcept {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }

  double sum_ = 0.0;
  double comp_ = 0.0;
  double sum_sq_ = 0.0;
  double comp_sq_ = 0.0;
  std::size_t count_ = 0;
};

namespace detail {

// Runs body(j) for j in [0, count). Each index writes only its own output,
// so the result does not depend on the thread count.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), count);
  if (workers <= 1) {
    for (std::size_t j = 0; j < count; ++j) body(j);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = w; j < count; j += workers) body(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

struct ConvergenceEstimates {
  std::vector<double> sample_times;
  std::vector<double> V, V_se;    // E (n/N - theta)^2
  std::vector<double> W0, W0_se;  // E (u(0,t) - u_n(0,t))^2
  std::vector<double> W1, W1_se;  // E (u(1,t) - u_n(1,t))^2
  std::vector<double> Q, Q_se;    // W0 + W1
  std::vector<double> VQ, VQ_se;  // V + Q
  int trials = 0;
};

/// Monte Carlo estimates of the mean-square gaps between the N+1 player game
/// and the mean field solution along equilibrium trajectories.
inline ConvergenceEstimates estimate_convergence(const NPlayerSolution& nsol, const MeanFieldSolution& mfsol,
                                                 const EquilibriumControl& control, const SimConfig& cfg) {
  if (nsol.spec_fingerprint() != mfsol.spec_fingerprint ||
      nsol.spec_fingerprint() != control.solution().spec_fingerprint()) {
    throw IncompatibleError("N-player and mean field solutions were computed for different models");
  }
  if (std::abs(nsol.horizon() - mfsol.horizon()) > 1e-12) throw IncompatibleError("horizons differ");
  if (cfg.players != nsol.players() || cfg.players != control.players()) {
    throw IncompatibleError("simulation N differs from the solved N");
  }
  cfg.validate(nsol.horizon());
  if (cfg.sample_times.empty()) throw DomainError("no sample times");

  const int N = cfg.players;
  const std::size_t S = cfg.sample_times.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);

  std::vector<double> theta(S), mf0(S), mf1(S);
  for (std::size_t s = 0; s < S; ++s) {
    theta[s] = mfsol.interpolate_theta(cfg.sample_times[s]);
    mf0[s] = mfsol.interpolate_u(0, cfg.sample_times[s]);
    mf1[s] = mfsol.interpolate_u(1, cfg.sample_times[s]);
  }

  // [trial][sample][V, W0, W1]
  std::vector<double> samples(trials * S * 3);
  detail::parallel_for(trials, [&](std::size_t trial) {
    const TrajectorySample path = simulate_chain(control, cfg, trial);
    double* out = samples.data() + trial * S * 3;
    for (std::size_t s = 0; s < S; ++s) {
      const double t = cfg.sample_times[s];
      const int n = path.at(t).n;
      const double dv = static_cast<double>(n) / N - theta[s];
      const double d0 = mf0[s] - nsol.interpolate(0, n, t);
      const double d1 = mf1[s] - nsol.interpolate(1, n, t);
      out[3 * s] = dv * dv;
      out[3 * s + 1] = d0 * d0;
      out[3 * s + 2] = d1 * d1;
    }
  });

  ConvergenceEstimates est;
  est.sample_times = cfg.sample_times;
  est.trials = cfg.trials;
  for (auto* v : {&est.V, &est.V_se, &est.W0, &est.W0_se, &est.W1, &est.W1_se, &est.Q, &est.Q_se, &est.VQ,
                  &est.VQ_se}) {
    v->resize(S);
  }
  for (std::size_t s = 0; s < S; ++s) {
    MomentAccumulator v, w0, w1, q, vq;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      const double* x = samples.data() + trial * S * 3 + 3 * s;
      v.add(x[0]);
      w0.add(x[1]);
      w1.add(x[2]);
      q.add(x[1] + x[2]);
      vq.add(x[0] + x[1] + x[2]);
    }
    est.V[s] = v.mean();
    est.V_se[s] = v.standard_error();
    est.W0[s] = w0.mean();
    est.W0_se[s] = w0.standard_error();
    est.W1[s] = w1.mean();
    est.W1_se[s] = w1.standard_error();
    est.Q[s] = q.mean();
    est.Q_se[s] = q.standard_error();
    est.VQ[s] = vq.mean();
    est.VQ_se[s] = vq.standard_error();
  }
  return est;
}

struct ValueCheckReport {
  double estimate = 0.0;
  double standard_error = 0.0;
  double solver_value = 0.0;
  double z_score = 0.0;
  bool pass = false;
};

/// Monte Carlo cost of the equilibrium control from `start` at time t0,
/// compared with the solved value u(i, n, t0); pass iff within 4 standard errors.
inline ValueCheckReport verify_value_function(const CostSpec& spec, const EquilibriumControl& control,
                                              const SimConfig& cfg, ChainState start, double t0) {
  const NPlayerSolution& sol = control.solution();
  if (spec.fingerprint() != sol.spec_fingerprint()) throw IncompatibleError("spec does not match the solution");
  require_state(start.i);
  if (start.n < 0 || start.n > sol.players()) throw DomainError("start n outside 0..N");
  if (!(t0 >= 0.0 && t0 <= sol.horizon())) throw DomainError("start time outside [0,T]");
  if (cfg.trials < 1) throw DomainError("trials must be at least 1");

  const int N = sol.players();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<double> costs(trials);
  detail::parallel_for(trials, [&](std::size_t trial) {
    CounterRng rng(cfg.master_seed, trial);
    const TrajectorySample path = simulate_from(control, N, start, t0, rng, cfg.rate_safety);
    const double running = integrate_path(path, sol.time_grid(), [&](int i, int n, double s) {
      return spec.running_cost(i, static_cast<double>(n) / N, control.rate(i, n, s));
    });
    const ChainState end = path.final_state();
    costs[trial] = running + spec.terminal_cost(end.i, static_cast<double>(end.n) / N);
  });

  MomentAccumulator acc;
  for (double c : costs) acc.add(c);

  ValueCheckReport report;
  report.estimate = acc.mean();
  report.standard_error = acc.standard_error();
  report.solver_value = sol.interpolate(start.i, start.n, t0);
  const double gap = std::abs(report.estimate - report.solver_value);
  if (report.standard_error > 0.0) {
    report.z_score = gap / report.standard_error;
    report.pass = report.z_score <= 4.0;
  } else {
    report.pass = gap <= 1e-9 * (1.0 + std::abs(report.solver_value));
  }
  return report;
}

}  // namespace tsmfg
