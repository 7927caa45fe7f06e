#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsmfg/cost.hpp"
#include "tsmfg/errors.hpp"

namespace tsmfg::cli {

// Raised for malformed or invalid configuration documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ModelBlock {
  std::string kind = "quadratic";  // quadratic | generic
  std::vector<double> f0{0.0}, f1{0.0};
  std::vector<double> g0{0.0}, g1{0.0};
  std::vector<double> psi0{0.0}, psi1{0.0};
  double T = 0.0;
  double gamma_conv = 1.0;
  double alpha_cap = 100.0;
  double theta_bar = 0.5;
};

struct SolverBlock {
  int steps = 200;       // N-player minimum RK4 steps
  int mfg_steps = 1000;  // mean field grid
  double damping = 0.5;
  double tol = 1e-9;
  int max_iterations = 500;
};

struct SimBlock {
  int N = 8;
  int trials = 10000;
  std::uint64_t master_seed = 0;
  int sample_times = 51;
  int start_i = 0;
  std::optional<int> start_n;  // defaults to floor(N/2)
  double start_t = 0.0;

  int resolved_start_n() const { return start_n.value_or(N / 2); }
};

struct SweepBlock {
  std::vector<int> N{8, 16, 32, 64};
};

struct RunConfig {
  ModelBlock model;
  SolverBlock solver;
  SimBlock sim;
  SweepBlock sweep;
  std::string out = "out";

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  CostSpec cost_spec() const;

  // Complete document (defaults filled in) that parse_config accepts.
  nlohmann::json to_json() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

}  // namespace tsmfg::cli
