#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "tsmfg/meanfield.hpp"
#include "tsmfg/nplayer.hpp"
#include "tsmfg/simulator.hpp"

using namespace tsmfg;

namespace {

struct Solved {
  CostSpec spec;
  std::shared_ptr<const NPlayerSolution> sol;
  EquilibriumControl control;
};

Solved solve(const CostSpec& spec, int N, int steps = 200) {
  auto sol = std::make_shared<const NPlayerSolution>(solve_nplayer(spec, N, steps));
  return {spec, sol, EquilibriumControl(sol, spec)};
}

SimConfig sim_config(int N, int trials, std::uint64_t seed, double horizon, double theta_bar) {
  SimConfig cfg;
  cfg.players = N;
  cfg.trials = trials;
  cfg.master_seed = seed;
  cfg.sample_times = uniform_sample_times(horizon, 11);
  cfg.theta_bar = theta_bar;
  return cfg;
}

}  // namespace

TEST(Generator, Examples) {
  const auto constant = [](int, int) { return 2.0; };
  EXPECT_EQ(apply_generator(constant, 5, 1.3, {0.7, 0.4}, 0, 2), 0.0);

  const auto linear = [](int, int n) { return static_cast<double>(n); };
  EXPECT_DOUBLE_EQ(apply_generator(linear, 5, 1.3, {0.7, 0.4}, 1, 2), 0.7 - 0.4);

  const auto square = [](int, int n) { return static_cast<double>(n * n); };
  EXPECT_DOUBLE_EQ(apply_generator(square, 5, 0.0, {2.0, 1.0}, 0, 3), 9.0);
  // independent evaluation of the same expression
  EXPECT_DOUBLE_EQ(apply_generator(square, 5, 0.0, {2.0, 1.0}, 0, 3), 2.0 * (16 - 9) + 1.0 * (4 - 9));

  const auto by_state = [](int i, int n) { return i == 0 ? 1.0 : 4.0 + n; };
  EXPECT_DOUBLE_EQ(apply_generator(by_state, 5, 0.5, {0.0, 0.0}, 0, 1), 0.5 * (5.0 - 1.0));
}

TEST(Generator, Preconditions) {
  const auto phi = [](int, int n) { return static_cast<double>(n); };
  EXPECT_THROW(apply_generator(phi, 3, 0.0, {0.0, 0.0}, 0, 4), std::out_of_range);
  EXPECT_THROW(apply_generator(phi, 3, 0.0, {0.0, 0.0}, 0, -1), std::out_of_range);
  EXPECT_THROW(apply_generator(phi, 3, 0.0, {0.0, 1.0}, 0, 0), DomainError);
  EXPECT_THROW(apply_generator(phi, 3, 0.0, {1.0, 0.0}, 0, 3), DomainError);
}

TEST(Simulator, ZeroCostNeverJumps) {
  const auto s = solve(zero_cost(0.0, 1.0), 6, 20);
  const SimConfig cfg = sim_config(6, 1, 3, 1.0, 0.5);
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const auto path = simulate_chain(s.control, cfg, trial);
    EXPECT_TRUE(path.jump_times.empty());
    EXPECT_EQ(path.at(0.7), path.initial);
  }
}

TEST(Simulator, TwoStateLaw) {
  // No other players: the reference state flips at constant rate a.
  const double a = 0.9, T = 1.0;
  const ConstantRateControl ctl{a, T};
  const int trials = 100000;
  int in_zero = 0;
  for (int trial = 0; trial < trials; ++trial) {
    CounterRng rng(99, static_cast<std::uint64_t>(trial));
    in_zero += simulate_from(ctl, 0, {0, 0}, 0.0, rng).final_state().i == 0;
  }
  const double p = 0.5 + 0.5 * std::exp(-2.0 * a * T);
  const double se = std::sqrt(p * (1 - p) / trials);
  EXPECT_NEAR(static_cast<double>(in_zero) / trials, p, 3.0 * se);
}

TEST(Simulator, EventCountIsPoisson) {
  const ConstantRateControl ctl{2.5, 2.0};
  const int trials = 20000;
  MomentAccumulator acc;
  for (int trial = 0; trial < trials; ++trial) {
    CounterRng rng(5, static_cast<std::uint64_t>(trial));
    acc.add(static_cast<double>(simulate_from(ctl, 0, {0, 0}, 0.0, rng, 1.0).jump_times.size()));
  }
  EXPECT_NEAR(acc.mean(), 5.0, 3.0 * acc.standard_error());
  EXPECT_NEAR(acc.standard_error() * acc.standard_error() * trials, 5.0, 0.3);  // variance = mean
}

TEST(Simulator, ReproducibleAndConfined) {
  const auto s = solve(crowd_averse_quadratic(0.5, 1.0), 10);
  const SimConfig cfg = sim_config(10, 1, 77, 1.0, 0.3);
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    const auto a = simulate_chain(s.control, cfg, trial);
    const auto b = simulate_chain(s.control, cfg, trial);
    ASSERT_EQ(a.jump_times, b.jump_times);
    ASSERT_EQ(a.states.size(), b.states.size());
    ChainState prev = a.initial;
    double last = 0.0;
    for (std::size_t j = 0; j < a.states.size(); ++j) {
      const ChainState s2 = a.states[j];
      ASSERT_EQ(s2, b.states[j]);
      ASSERT_GE(s2.n, 0);
      ASSERT_LE(s2.n, 10);
      const int di = std::abs(s2.i - prev.i), dn = std::abs(s2.n - prev.n);
      ASSERT_EQ(di + dn, 1);
      ASSERT_GT(a.jump_times[j], last);
      last = a.jump_times[j];
      prev = s2;
    }
    ASSERT_LE(last, 1.0);
  }
  SimConfig other = cfg;
  other.master_seed = 78;
  bool differs = false;
  for (std::uint64_t trial = 0; trial < 20 && !differs; ++trial)
    differs = simulate_chain(s.control, cfg, trial).jump_times != simulate_chain(s.control, other, trial).jump_times;
  EXPECT_TRUE(differs);
}

TEST(Simulator, DynkinFormulaForOccupancy) {
  const int N = 4;
  const auto s = solve(crowd_averse_quadratic(0.5, 1.0), N);
  const ChainState start{0, 1};
  MomentAccumulator acc;
  for (std::uint64_t trial = 0; trial < 40000; ++trial) {
    CounterRng rng(123, trial);
    const auto path = simulate_from(s.control, N, start, 0.0, rng);
    const double drift = integrate_path(path, s.sol->time_grid(), [&](int i, int n, double t) {
      const auto r = move_rates(s.control, N, {i, n}, t);
      return r[1] - r[2];
    });
    acc.add(path.final_state().n - start.n - drift);
  }
  EXPECT_NEAR(acc.mean(), 0.0, 4.0 * acc.standard_error());
}

TEST(Estimates, InitialVarianceIsBinomial) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 0.5);
  const auto mf = solve_mfg(spec, 0.3);
  for (int N : {8, 32}) {
    const auto s = solve(spec, N);
    const auto est = estimate_convergence(*s.sol, mf, s.control, sim_config(N, 10000, 17, 0.5, 0.3));
    EXPECT_NEAR(est.V[0], 0.21 / N, 3.0 * est.V_se[0]) << "N=" << N;
    for (std::size_t k = 0; k < est.V.size(); ++k) {
      EXPECT_GE(est.V[k], 0.0);
      EXPECT_GE(est.Q[k], 0.0);
      EXPECT_NEAR(est.Q[k], est.W0[k] + est.W1[k], 1e-12);
    }
  }
}

TEST(Estimates, ZeroCostHasNoValueGap) {
  const CostSpec spec = zero_cost(0.0, 1.0);
  const auto mf = solve_mfg(spec, 0.3);
  const auto s = solve(spec, 8, 20);
  const auto est = estimate_convergence(*s.sol, mf, s.control, sim_config(8, 2000, 1, 1.0, 0.3));
  for (double q : est.Q) EXPECT_EQ(q, 0.0);
}

TEST(Estimates, GapShrinksWithN) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 0.5);
  const auto mf = solve_mfg(spec, 0.3);
  double sup[2];
  int idx = 0;
  for (int N : {16, 32}) {
    const auto s = solve(spec, N);
    SimConfig cfg = sim_config(N, 10000, 4, 0.5, 0.3);
    cfg.sample_times = uniform_sample_times(0.5, 51);
    const auto est = estimate_convergence(*s.sol, mf, s.control, cfg);
    sup[idx++] = *std::max_element(est.VQ.begin(), est.VQ.end());
  }
  const double ratio = sup[0] / sup[1];
  EXPECT_GE(ratio, 1.4);
  EXPECT_LE(ratio, 2.8);
}

TEST(Estimates, RejectsMismatchedInputs) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 0.5);
  const auto mf_other = solve_mfg(crowd_averse_quadratic(0.6, 0.5), 0.3);
  const auto s = solve(spec, 8);
  EXPECT_THROW(estimate_convergence(*s.sol, mf_other, s.control, sim_config(8, 10, 1, 0.5, 0.3)), IncompatibleError);
  const auto mf = solve_mfg(spec, 0.3);
  EXPECT_THROW(estimate_convergence(*s.sol, mf, s.control, sim_config(9, 10, 1, 0.5, 0.3)), IncompatibleError);
}

TEST(ValueCheck, TrivialInstances) {
  for (double c : {0.0, 1.25}) {
    const CostSpec spec = zero_cost(c, 1.0);
    const auto s = solve(spec, 4, 20);
    const auto r = verify_value_function(spec, s.control, sim_config(4, 100, 9, 1.0, 0.5), {0, 2}, 0.0);
    EXPECT_EQ(r.estimate, c);
    EXPECT_EQ(r.solver_value, c);
    EXPECT_TRUE(r.pass);
  }
}

TEST(ValueCheck, MonteCarloAgreesWithSolver) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  const auto s = solve(spec, 4);
  const auto r = verify_value_function(spec, s.control, sim_config(4, 40000, 31, 1.0, 0.5), {1, 2}, 0.25);
  EXPECT_TRUE(r.pass) << "z = " << r.z_score;
  EXPECT_GT(r.standard_error, 0.0);
}
