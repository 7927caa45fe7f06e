#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "tsmfg/errors.hpp"

namespace tsmfg {

inline constexpr int kStateCount = 2;

inline void require_state(int i) {
  if (i != 0 && i != 1) {
    throw DomainError("state index must be 0 or 1, got " + std::to_string(i));
  }
}

inline void require_unit_interval(double theta, const char* what = "theta") {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " + std::to_string(theta));
  }
}

// Polynomial in theta with the constant term first, evaluated by Horner's rule.
class Polynomial {
 public:
  static constexpr std::size_t kMaxDegree = 8;

  Polynomial() = default;
  Polynomial(std::initializer_list<double> coeffs) : Polynomial(std::vector<double>(coeffs)) {}
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.size() > kMaxDegree + 1) {
      throw DomainError("polynomial degree exceeds " + std::to_string(kMaxDegree));
    }
    for (double c : coeffs_) {
      if (!std::isfinite(c)) throw DomainError("polynomial coefficient is not finite");
    }
  }

  double operator()(double x) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  // Bound on |p'(x)| over [0,1] from the coefficients.
  double lipschitz_bound() const noexcept {
    double acc = 0.0;
    for (std::size_t k = 1; k < coeffs_.size(); ++k) acc += static_cast<double>(k) * std::abs(coeffs_[k]);
    return acc;
  }

  bool is_constant() const noexcept {
    for (std::size_t k = 1; k < coeffs_.size(); ++k) {
      if (coeffs_[k] != 0.0) return false;
    }
    return true;
  }

  const std::vector<double>& coefficients() const noexcept { return coeffs_; }

 private:
  std::vector<double> coeffs_;
};

enum class CostKind { Quadratic, GenericConvex };

// User supplied running cost c(i, theta, alpha), uniformly convex in alpha >= 0.
// The alpha-derivative is optional; when present it sharpens the minimizer.
struct GenericCost {
  std::function<double(int, double, double)> value;
  std::function<double(int, double, double)> alpha_derivative;
};

// Model data of the two-state game.
//
// Quadratic kind: c(i, theta, alpha) = f(i, theta) + alpha^2 / 2 - alpha g(i, theta).
// GenericConvex kind: c comes from `generic`; f and g are ignored.
// Terminal cost psi(i, theta) is always polynomial.
struct CostSpec {
  CostKind kind = CostKind::Quadratic;
  std::array<Polynomial, kStateCount> f{};
  std::array<Polynomial, kStateCount> g{};
  std::array<Polynomial, kStateCount> psi{};
  double horizon = 1.0;
  double convexity_modulus = 1.0;
  double alpha_cap = 100.0;
  GenericCost generic{};

  // Throws DomainError naming the offending field.
  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("T must be positive");
    if (!(convexity_modulus > 0.0) || !std::isfinite(convexity_modulus)) {
      throw DomainError("gamma_conv must be positive");
    }
    if (!(alpha_cap > 0.0) || !std::isfinite(alpha_cap)) throw DomainError("alpha_cap must be positive");
    if (kind == CostKind::GenericConvex && !generic.value) {
      throw DomainError("generic cost kind requires a cost evaluator");
    }
  }

  double running_cost(int i, double theta, double alpha) const {
    if (kind == CostKind::Quadratic) {
      return f[i](theta) + 0.5 * alpha * alpha - alpha * g[i](theta);
    }
    return generic.value(i, theta, alpha);
  }

  double terminal_cost(int i, double theta) const { return psi[i](theta); }

  // Hash of coefficients and scalars. Generic evaluators are not covered.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    };
    auto mix_double = [&mix](double d) { mix(std::bit_cast<std::uint64_t>(d)); };
    mix(static_cast<std::uint64_t>(kind));
    for (const auto* family : {&f, &g, &psi}) {
      for (const auto& poly : *family) {
        mix(poly.coefficients().size());
        for (double c : poly.coefficients()) mix_double(c);
      }
    }
    mix_double(horizon);
    mix_double(convexity_modulus);
    mix_double(alpha_cap);
    return h;
  }
};

// The crowd-averse example: f(0,th) = th, f(1,th) = 1 - th, constant g,
// psi = f. Satisfies both monotonicity conditions with gamma = 2.
inline CostSpec crowd_averse_quadratic(double g_const, double horizon) {
  CostSpec spec;
  spec.kind = CostKind::Quadratic;
  spec.f = {Polynomial{0.0, 1.0}, Polynomial{1.0, -1.0}};
  spec.g = {Polynomial{g_const}, Polynomial{g_const}};
  spec.psi = spec.f;
  spec.horizon = horizon;
  spec.convexity_modulus = 1.0;
  spec.alpha_cap = 100.0;
  return spec;
}

// f = g = 0 with constant terminal cost.
inline CostSpec zero_cost(double psi_const, double horizon) {
  CostSpec spec;
  spec.f = {Polynomial{0.0}, Polynomial{0.0}};
  spec.g = {Polynomial{0.0}, Polynomial{0.0}};
  spec.psi = {Polynomial{psi_const}, Polynomial{psi_const}};
  spec.horizon = horizon;
  return spec;
}

}  // namespace tsmfg
