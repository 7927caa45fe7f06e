#pragma once

#include <algorithm>
#include <cmath>

#include "tsmfg/cost.hpp"
#include "tsmfg/errors.hpp"

namespace tsmfg {

// Value of h(p, theta, i) = min_{alpha >= 0} c(i, theta, alpha) + alpha p
// together with the minimizer alpha*(p, theta, i).
struct HamiltonianPoint {
  double value = 0.0;
  double rate = 0.0;
};

inline constexpr double kGoldenTolerance = 1e-10;

// Minimizes a unimodal function on [lo, hi] to bracket width `tol`.
template <class F>
double golden_section_minimize(F&& fn, double lo, double hi, double tol = kGoldenTolerance) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  return 0.5 * (a + b);
}

namespace detail {

// Internal callers may hand in theta a few ulps outside [0,1].
inline double absorb_roundoff(double theta) {
  if (theta < 0.0 && theta >= -1e-12) return 0.0;
  if (theta > 1.0 && theta <= 1.0 + 1e-12) return 1.0;
  return theta;
}

inline HamiltonianPoint evaluate_quadratic(const CostSpec& spec, double p, double theta, int i) {
  const double rate = std::max(spec.g[i](theta) - p, 0.0);
  return {spec.f[i](theta) - 0.5 * rate * rate, rate};
}

inline HamiltonianPoint evaluate_generic(const CostSpec& spec, double p, double theta, int i) {
  const auto& cost = spec.generic;
  const double cap = spec.alpha_cap;
  auto objective = [&](double a) { return cost.value(i, theta, a) + a * p; };

  if (cost.alpha_derivative) {
    auto slope = [&](double a) { return cost.alpha_derivative(i, theta, a) + p; };
    if (slope(0.0) >= 0.0) return {objective(0.0), 0.0};
    if (slope(cap) < 0.0) {
      throw BracketError("objective still decreasing at alpha_cap; increase alpha_cap");
    }
    double a = golden_section_minimize(objective, 0.0, cap);
    // One Newton step on the first-order condition.
    const double d = slope(a);
    const double delta = 1e-6 * std::max(1.0, a);
    const double lo = std::max(0.0, a - delta);
    const double hi = std::min(cap, a + delta);
    const double curvature = (slope(hi) - slope(lo)) / (hi - lo);
    if (curvature > 0.0) {
      const double refined = std::clamp(a - d / curvature, 0.0, cap);
      if (std::abs(slope(refined)) <= std::abs(d)) a = refined;
    }
    return {objective(a), a};
  }

  const double a = golden_section_minimize(objective, 0.0, cap);
  if (cap - a <= 10.0 * kGoldenTolerance) {
    const double delta = 1e-6 * std::max(1.0, cap);
    if (objective(cap) < objective(cap - delta)) {
      throw BracketError("objective still decreasing at alpha_cap; increase alpha_cap");
    }
  }
  return {objective(a), a};
}

// Unchecked evaluation for solver inner loops.
inline HamiltonianPoint evaluate(const CostSpec& spec, double p, double theta, int i) {
  theta = absorb_roundoff(theta);
  if (spec.kind == CostKind::Quadratic) return evaluate_quadratic(spec, p, theta, i);
  return evaluate_generic(spec, p, theta, i);
}

}  // namespace detail

inline HamiltonianPoint hamiltonian_point(const CostSpec& spec, double p, double theta, int i) {
  require_unit_interval(theta);
  require_state(i);
  if (!std::isfinite(p)) throw DomainError("p must be finite");
  return detail::evaluate(spec, p, theta, i);
}

/// h(p, theta, i). Nondecreasing and concave in p.
inline double hamiltonian(const CostSpec& spec, double p, double theta, int i) {
  return hamiltonian_point(spec, p, theta, i).value;
}

/// alpha*(p, theta, i) >= 0, Lipschitz in p with constant 1 / convexity_modulus.
inline double optimal_rate(const CostSpec& spec, double p, double theta, int i) {
  return hamiltonian_point(spec, p, theta, i).rate;
}

}  // namespace tsmfg
