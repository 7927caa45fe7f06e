#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsmfg/meanfield.hpp"

using namespace tsmfg;

namespace {

oracle::TwoStateGame crowd_shooting(double g, double T, double theta_bar) {
  oracle::TwoStateGame game;
  game.f0 = [](long double th) { return th; };
  game.f1 = [](long double th) { return 1.0L - th; };
  game.psi0 = game.f0;
  game.psi1 = game.f1;
  game.g = g;
  game.horizon = T;
  game.theta_bar = theta_bar;
  return game;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

TEST(HamiltonJacobi, TrivialInstances) {
  const std::vector<double> path(101, 0.4);
  for (double c : {0.0, 2.5}) {
    const auto u = solve_hj_given_theta(zero_cost(c, 1.0), path);
    for (int i = 0; i < 2; ++i)
      for (double v : u[static_cast<std::size_t>(i)]) EXPECT_EQ(v, c);
  }
}

TEST(HamiltonJacobi, SelfConvergenceAtFixedTheta) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  const auto coarse = solve_hj_given_theta(spec, std::vector<double>(201, 0.5));
  const auto fine = solve_hj_given_theta(spec, std::vector<double>(20001, 0.5));
  for (std::size_t k = 0; k <= 200; ++k)
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(coarse[i][k], fine[i][100 * k], 1e-8);
}

TEST(PopulationFlow, ZeroControlKeepsTheta) {
  const std::vector<double> zero(51, 0.0);
  for (double v : solve_theta_given_control(zero, zero, 0.37, 1.0)) EXPECT_EQ(v, 0.37);
}

TEST(PopulationFlow, ConstantRatesMatchExponential) {
  const double b = 0.8, T = 2.0, tb = 0.1;
  const std::vector<double> beta(1001, b);
  const auto th = solve_theta_given_control(beta, beta, tb, T);
  for (std::size_t k = 0; k < th.size(); ++k) {
    const double t = T * static_cast<double>(k) / 1000.0;
    EXPECT_NEAR(th[k], 0.5 + (tb - 0.5) * std::exp(-2.0 * b * t), 1e-8);
  }
}

TEST(PopulationFlow, SymmetricRatesKeepHalf) {
  std::vector<double> beta(201);
  for (std::size_t k = 0; k < beta.size(); ++k) beta[k] = 1.0 + std::sin(0.1 * k);
  for (double v : solve_theta_given_control(beta, beta, 0.5, 1.0)) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(PopulationFlow, StaysInUnitInterval) {
  std::vector<double> b0(101), b1(101);
  for (std::size_t k = 0; k < 101; ++k) {
    b0[k] = 20.0 * (k % 2);
    b1[k] = 20.0 * ((k + 1) % 2);
  }
  for (double tb : {0.0, 1.0, 0.5})
    for (double v : solve_theta_given_control(b0, b1, tb, 1.0)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_THROW(solve_theta_given_control(std::vector<double>(3, -1.0), b1, 0.5, 1.0), DomainError);
}

TEST(XiOperator, ZeroCostReturnsInitialFraction) {
  const CostSpec spec = zero_cost(0.0, 1.0);
  std::vector<double> path(101);
  for (std::size_t k = 0; k < path.size(); ++k) path[k] = 0.01 * static_cast<double>(k);
  for (double v : xi_operator(spec, path, 0.3)) EXPECT_EQ(v, 0.3);
}

TEST(XiOperator, OutputIsLipschitzInTime) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  std::vector<double> path(501);
  for (std::size_t k = 0; k < path.size(); ++k) path[k] = 0.5 + 0.4 * std::cos(0.02 * static_cast<double>(k));
  const auto out = xi_operator(spec, path, 0.2);
  const auto u = solve_hj_given_theta(spec, path);
  const auto beta = mean_field_controls(spec, path, u);
  double lam = 0.0;
  for (int i = 0; i < 2; ++i)
    for (double b : beta[static_cast<std::size_t>(i)]) lam = std::max(lam, b);
  const double h = 1.0 / 500.0;
  for (std::size_t k = 0; k + 1 < out.size(); ++k) EXPECT_LE(std::abs(out[k + 1] - out[k]), lam * h * (1 + 1e-9));
}

TEST(MeanField, ZeroCostConvergesImmediately) {
  const auto sol = solve_mfg(zero_cost(0.0, 1.0), 0.3);
  EXPECT_EQ(sol.iterations, 1);
  for (double v : sol.theta) EXPECT_EQ(v, 0.3);
  for (int i = 0; i < 2; ++i)
    for (double v : sol.u[static_cast<std::size_t>(i)]) EXPECT_EQ(v, 0.0);
}

TEST(MeanField, SymmetricInstanceStaysAtHalf) {
  for (double g : {0.25, 0.5, 1.0}) {
    const auto sol = solve_mfg(crowd_averse_quadratic(g, 1.0), 0.5);
    for (double v : sol.theta) EXPECT_NEAR(v, 0.5, 1e-6);
  }
}

TEST(MeanField, MatchesShootingOracle) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  const auto sol = solve_mfg(spec, 0.3);
  const double ref = static_cast<double>(crowd_shooting(0.5, 1.0, 0.3).terminal_theta());
  ASSERT_TRUE(std::isfinite(ref));
  EXPECT_NEAR(sol.theta.back(), ref, 1e-5);
}

TEST(MeanField, MatchesShootingOracleOtherInstances) {
  for (auto [g, T, tb] : {std::tuple{0.8, 0.5, 0.1}, std::tuple{0.3, 2.0, 0.9}}) {
    const auto sol = solve_mfg(crowd_averse_quadratic(g, T), tb);
    const double ref = static_cast<double>(crowd_shooting(g, T, tb).terminal_theta());
    EXPECT_NEAR(sol.theta.back(), ref, 1e-5) << "g=" << g << " T=" << T;
  }
}

TEST(MeanField, BoundaryConditionsAndCertificate) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  FixedPointConfig fp;
  const auto sol = solve_mfg(spec, 0.3, fp);
  EXPECT_EQ(sol.theta.front(), 0.3);
  EXPECT_EQ(sol.u[0].back(), spec.terminal_cost(0, sol.theta.back()));
  EXPECT_EQ(sol.u[1].back(), spec.terminal_cost(1, sol.theta.back()));
  EXPECT_LT(sol.residual, fp.tolerance);
  EXPECT_LT(sol.defect_theta, 1e-5);
  EXPECT_LT(sol.defect_u, 1e-5);
  const auto again = xi_operator(spec, sol.theta, 0.3);
  EXPECT_LE(sup_diff(again, sol.theta), fp.tolerance / fp.damping);
  for (double v : sol.theta) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(MeanField, UniqueFromDifferentStarts) {
  const CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  std::vector<std::vector<double>> thetas;
  for (double start : {0.0, 0.3, 1.0}) {
    FixedPointConfig fp;
    fp.initial_path = std::vector<double>(1001, start);
    thetas.push_back(solve_mfg(spec, 0.3, fp).theta);
  }
  EXPECT_LE(sup_diff(thetas[0], thetas[1]), 1e-7);
  EXPECT_LE(sup_diff(thetas[0], thetas[2]), 1e-7);
}

TEST(MeanField, ReportsNonConvergence) {
  FixedPointConfig fp;
  fp.max_iterations = 2;
  try {
    solve_mfg(crowd_averse_quadratic(0.5, 1.0), 0.3, fp);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 2);
    EXPECT_GT(e.last_residual(), 0.0);
  }
  fp.damping = 0.0;
  EXPECT_THROW(solve_mfg(crowd_averse_quadratic(0.5, 1.0), 0.3, fp), DomainError);
}

TEST(Monotonicity, TerminalCost) {
  CostSpec spec = crowd_averse_quadratic(0.5, 1.0);
  const auto good = check_monotonicity_psi(spec, 101);
  EXPECT_TRUE(good.pass);
  EXPECT_NEAR(good.worst_value, 0.0, 1e-15);

  spec.psi = {Polynomial{0.0, -1.0}, Polynomial{0.0, 1.0}};
  const auto bad = check_monotonicity_psi(spec, 101);
  EXPECT_FALSE(bad.pass);
  EXPECT_NEAR(bad.worst_value, -2.0, 1e-12);  // -2 (x - y)^2 at the corners
  EXPECT_EQ(std::abs(bad.worst_x - bad.worst_y), 1.0);

  EXPECT_TRUE(check_monotonicity_psi(zero_cost(4.0, 1.0), 11).pass);
}

TEST(Monotonicity, RunningCost) {
  const auto good = check_monotonicity_f(crowd_averse_quadratic(0.5, 1.0), 101);
  EXPECT_TRUE(good.pass);
  EXPECT_NEAR(good.gamma, 2.0, 1e-9);

  const auto flat = check_monotonicity_f(zero_cost(0.0, 1.0), 101);
  EXPECT_FALSE(flat.pass);
  EXPECT_EQ(flat.gamma, 0.0);

  CostSpec rev = crowd_averse_quadratic(0.5, 1.0);
  rev.f = {Polynomial{0.0, -1.0}, Polynomial{0.0, 1.0}};
  EXPECT_FALSE(check_monotonicity_f(rev, 101).pass);

  CostSpec varying = crowd_averse_quadratic(0.5, 1.0);
  varying.g[0] = Polynomial{0.5, 1.0};
  EXPECT_THROW(check_monotonicity_f(varying, 11), PreconditionError);
}
