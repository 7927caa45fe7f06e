#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tsmfg/convergence.hpp"

using namespace tsmfg;

TEST(RateFit, PowerLaws) {
  const std::vector<double> n{8, 16, 32, 64};
  std::vector<double> inv, inv2, flat;
  for (double x : n) {
    inv.push_back(3.0 / x);
    inv2.push_back(0.5 / (x * x));
    flat.push_back(0.7);
  }
  const auto a = fit_rate(n, inv);
  EXPECT_NEAR(a.slope, -1.0, 1e-12);
  EXPECT_NEAR(a.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(a.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(fit_rate(n, inv2).slope, -2.0, 1e-12);
  EXPECT_NEAR(fit_rate(n, flat).slope, 0.0, 1e-12);
}

TEST(RateFit, RejectsBadInput) {
  const std::vector<double> n{8, 16, 32};
  EXPECT_THROW(fit_rate(n, std::vector<double>{1.0, 0.0, 2.0}), DomainError);
  EXPECT_THROW(fit_rate(n, std::vector<double>{1.0, 2.0}), DomainError);
  EXPECT_THROW(fit_rate(std::vector<double>{8}, std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(fit_rate(std::vector<double>{8, 8}, std::vector<double>{1.0, 2.0}), DomainError);
}

TEST(Sweep, ZeroCostFollowsBinomialVariance) {
  SweepConfig cfg;
  cfg.n_values = {8, 16, 32, 64};
  cfg.trials = 10000;
  cfg.master_seed = 3;
  cfg.theta_bar = 0.3;
  cfg.sample_count = 11;
  const auto report = run_sweep(zero_cost(0.0, 0.5), cfg);
  ASSERT_TRUE(report.fit_ok);
  EXPECT_NEAR(report.fit.slope, -1.0, 0.1);
  for (const auto& e : report.entries) {
    ASSERT_TRUE(e.ok);
    for (double q : e.estimates.Q) EXPECT_EQ(q, 0.0);
    EXPECT_NEAR(e.estimates.V[0], 0.21 / e.players, 3.0 * e.estimates.V_se[0]);
  }
}

TEST(Sweep, QuadraticInstanceRate) {
  SweepConfig cfg;
  cfg.n_values = {8, 16, 32, 64};
  cfg.trials = 20000;
  cfg.master_seed = 42;
  const auto report = run_sweep(crowd_averse_quadratic(0.5, 0.5), cfg);
  ASSERT_TRUE(report.fit_ok);
  EXPECT_GE(report.fit.slope, -1.3);
  EXPECT_LE(report.fit.slope, -0.7);
  EXPECT_GE(report.fit.r_squared, 0.9);
  EXPECT_NEAR(report.rho_bound_note, 0.5 * report.envelope_constant, 1e-15);
  for (const auto& e : report.entries) {
    EXPECT_EQ(e.seed, sweep_seed(42, e.players));
    EXPECT_GE(e.sup_vq, 0.0);
  }
}

TEST(Sweep, FailedEntriesAreReported) {
  // With a tight alpha_cap the mean field solve succeeds but the N-player
  // rate bound needs rates beyond the cap, so every entry fails.
  CostSpec spec = crowd_averse_quadratic(0.5, 0.5);
  const auto f = spec.f;
  spec.kind = CostKind::GenericConvex;
  spec.generic.value = [f](int i, double th, double a) { return f[i](th) + 0.5 * a * a - 0.5 * a; };
  spec.generic.alpha_derivative = [](int, double, double a) { return a - 0.5; };
  spec.alpha_cap = 0.9;
  SweepConfig cfg;
  cfg.n_values = {2, 4, 8};
  cfg.trials = 10;
  const auto report = run_sweep(spec, cfg);
  EXPECT_FALSE(report.fit_ok);
  for (const auto& e : report.entries) {
    EXPECT_FALSE(e.ok);
    EXPECT_FALSE(e.error.empty());
  }
}

TEST(Sweep, RejectsBadNValues) {
  SweepConfig cfg;
  cfg.trials = 10;
  cfg.n_values = {8, 4, 2};
  EXPECT_THROW(run_sweep(crowd_averse_quadratic(0.5, 0.5), cfg), DomainError);
  cfg.n_values = {2, 4};
  EXPECT_THROW(run_sweep(crowd_averse_quadratic(0.5, 0.5), cfg), DomainError);
}
