#include "cli/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace tsmfg::cli {
namespace {

std::string where(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  if (mark.is_null()) return "";
  return " (line " + std::to_string(mark.line + 1) + ")";
}

template <class T>
T read_scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("key '" + key + "' expects a scalar" + where(node));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("key '" + key + "' has an invalid value '" + node.Scalar() + "'" + where(node));
  }
}

template <class T>
std::vector<T> read_list(const YAML::Node& node, const std::string& key) {
  if (node.IsScalar()) return {read_scalar<T>(node, key)};
  if (!node.IsSequence()) throw ConfigError("key '" + key + "' expects an array" + where(node));
  std::vector<T> out;
  for (const auto& item : node) out.push_back(read_scalar<T>(item, key));
  return out;
}

using FieldReader = std::function<void(const YAML::Node&)>;

void read_section(const YAML::Node& section, const std::string& name, const std::map<std::string, FieldReader>& fields) {
  if (!section.IsMap()) throw ConfigError("section '" + name + "' must be a mapping" + where(section));
  for (const auto& entry : section) {
    const auto key = entry.first.as<std::string>();
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throw ConfigError("unknown key '" + key + "' in section '" + name + "'" + where(entry.first));
    }
    it->second(entry.second);
  }
}

void check(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError("invalid value for '" + key + "': " + rule);
}

void check_coefficients(const std::vector<double>& c, const std::string& key) {
  check(!c.empty(), key, "needs at least one coefficient");
  check(c.size() <= Polynomial::kMaxDegree + 1, key, "polynomial degree must not exceed 8");
  for (double v : c) check(std::isfinite(v), key, "coefficients must be finite");
}

}  // namespace

void RunConfig::validate() const {
  check(model.kind == "quadratic" || model.kind == "generic", "kind", "must be 'quadratic' or 'generic'");
  check_coefficients(model.f0, "f0");
  check_coefficients(model.f1, "f1");
  check_coefficients(model.g0, "g0");
  check_coefficients(model.g1, "g1");
  check_coefficients(model.psi0, "psi0");
  check_coefficients(model.psi1, "psi1");
  check(std::isfinite(model.T) && model.T > 0.0, "T", "must be positive");
  check(std::isfinite(model.gamma_conv) && model.gamma_conv > 0.0, "gamma_conv", "must be positive");
  check(std::isfinite(model.alpha_cap) && model.alpha_cap > 0.0, "alpha_cap", "must be positive");
  check(model.theta_bar >= 0.0 && model.theta_bar <= 1.0, "theta_bar", "must lie in [0,1]");

  check(solver.steps >= 1, "steps", "must be at least 1");
  check(solver.mfg_steps >= 1, "mfg_steps", "must be at least 1");
  check(solver.damping > 0.0 && solver.damping <= 1.0, "damping", "must lie in (0,1]");
  check(solver.tol > 0.0, "tol", "must be positive");
  check(solver.max_iterations >= 1, "max_iterations", "must be at least 1");

  check(sim.N >= 1, "N", "must be at least 1");
  check(sim.trials >= 1, "trials", "must be at least 1");
  check(sim.sample_times >= 2, "sample_times", "must be at least 2");
  check(sim.start_i == 0 || sim.start_i == 1, "start_i", "must be 0 or 1");
  const int n = sim.resolved_start_n();
  check(n >= 0 && n <= sim.N, "start_n", "must lie in 0..N");
  check(sim.start_t >= 0.0 && sim.start_t <= model.T, "start_t", "must lie in [0,T]");

  check(sweep.N.size() >= 3, "sweep.N", "needs at least three entries");
  for (std::size_t k = 0; k < sweep.N.size(); ++k) {
    check(sweep.N[k] >= 1, "sweep.N", "entries must be positive");
    check(k == 0 || sweep.N[k] > sweep.N[k - 1], "sweep.N", "entries must be increasing");
  }
  check(!out.empty(), "out", "must not be empty");
}

CostSpec RunConfig::cost_spec() const {
  CostSpec spec;
  spec.kind = model.kind == "generic" ? CostKind::GenericConvex : CostKind::Quadratic;
  spec.f = {Polynomial(model.f0), Polynomial(model.f1)};
  spec.g = {Polynomial(model.g0), Polynomial(model.g1)};
  spec.psi = {Polynomial(model.psi0), Polynomial(model.psi1)};
  spec.horizon = model.T;
  spec.convexity_modulus = model.gamma_conv;
  spec.alpha_cap = model.alpha_cap;
  if (spec.kind == CostKind::GenericConvex) {
    // The file format only describes the quadratic family; the generic kind
    // routes the same cost through the numeric minimizer.
    const auto f = spec.f;
    const auto g = spec.g;
    spec.generic.value = [f, g](int i, double theta, double a) { return f[i](theta) + 0.5 * a * a - a * g[i](theta); };
    spec.generic.alpha_derivative = [g](int i, double theta, double a) { return a - g[i](theta); };
  }
  return spec;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["model"] = {{"kind", model.kind},   {"f0", model.f0},
                {"f1", model.f1},       {"g0", model.g0},
                {"g1", model.g1},       {"psi0", model.psi0},
                {"psi1", model.psi1},   {"T", model.T},
                {"gamma_conv", model.gamma_conv}, {"alpha_cap", model.alpha_cap},
                {"theta_bar", model.theta_bar}};
  j["solver"] = {{"steps", solver.steps},
                 {"mfg_steps", solver.mfg_steps},
                 {"damping", solver.damping},
                 {"tol", solver.tol},
                 {"max_iterations", solver.max_iterations}};
  j["sim"] = {{"N", sim.N},
              {"trials", sim.trials},
              {"master_seed", sim.master_seed},
              {"sample_times", sim.sample_times},
              {"start_i", sim.start_i},
              {"start_n", sim.resolved_start_n()},
              {"start_t", sim.start_t}};
  j["sweep"] = {{"N", sweep.N}};
  j["out"] = out;
  return j;
}

RunConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("parse error at line " + std::to_string(e.mark.line + 1) + ", column " +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a mapping of sections");

  RunConfig cfg;
  auto& m = cfg.model;
  auto& s = cfg.solver;
  auto& sim = cfg.sim;

  const std::map<std::string, FieldReader> model_fields{
      {"kind", [&](const YAML::Node& n) { m.kind = read_scalar<std::string>(n, "kind"); }},
      {"f0", [&](const YAML::Node& n) { m.f0 = read_list<double>(n, "f0"); }},
      {"f1", [&](const YAML::Node& n) { m.f1 = read_list<double>(n, "f1"); }},
      {"g0", [&](const YAML::Node& n) { m.g0 = read_list<double>(n, "g0"); }},
      {"g1", [&](const YAML::Node& n) { m.g1 = read_list<double>(n, "g1"); }},
      {"psi0", [&](const YAML::Node& n) { m.psi0 = read_list<double>(n, "psi0"); }},
      {"psi1", [&](const YAML::Node& n) { m.psi1 = read_list<double>(n, "psi1"); }},
      {"T", [&](const YAML::Node& n) { m.T = read_scalar<double>(n, "T"); }},
      {"gamma_conv", [&](const YAML::Node& n) { m.gamma_conv = read_scalar<double>(n, "gamma_conv"); }},
      {"alpha_cap", [&](const YAML::Node& n) { m.alpha_cap = read_scalar<double>(n, "alpha_cap"); }},
      {"theta_bar", [&](const YAML::Node& n) { m.theta_bar = read_scalar<double>(n, "theta_bar"); }},
  };
  const std::map<std::string, FieldReader> solver_fields{
      {"steps", [&](const YAML::Node& n) { s.steps = read_scalar<int>(n, "steps"); }},
      {"mfg_steps", [&](const YAML::Node& n) { s.mfg_steps = read_scalar<int>(n, "mfg_steps"); }},
      {"damping", [&](const YAML::Node& n) { s.damping = read_scalar<double>(n, "damping"); }},
      {"tol", [&](const YAML::Node& n) { s.tol = read_scalar<double>(n, "tol"); }},
      {"max_iterations", [&](const YAML::Node& n) { s.max_iterations = read_scalar<int>(n, "max_iterations"); }},
  };
  const std::map<std::string, FieldReader> sim_fields{
      {"N", [&](const YAML::Node& n) { sim.N = read_scalar<int>(n, "N"); }},
      {"trials", [&](const YAML::Node& n) { sim.trials = read_scalar<int>(n, "trials"); }},
      {"master_seed", [&](const YAML::Node& n) { sim.master_seed = read_scalar<std::uint64_t>(n, "master_seed"); }},
      {"sample_times", [&](const YAML::Node& n) { sim.sample_times = read_scalar<int>(n, "sample_times"); }},
      {"start_i", [&](const YAML::Node& n) { sim.start_i = read_scalar<int>(n, "start_i"); }},
      {"start_n", [&](const YAML::Node& n) { sim.start_n = read_scalar<int>(n, "start_n"); }},
      {"start_t", [&](const YAML::Node& n) { sim.start_t = read_scalar<double>(n, "start_t"); }},
  };
  const std::map<std::string, FieldReader> sweep_fields{
      {"N", [&](const YAML::Node& n) { cfg.sweep.N = read_list<int>(n, "sweep.N"); }},
  };

  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    if (key == "model") {
      read_section(entry.second, key, model_fields);
    } else if (key == "solver") {
      read_section(entry.second, key, solver_fields);
    } else if (key == "sim") {
      read_section(entry.second, key, sim_fields);
    } else if (key == "sweep") {
      read_section(entry.second, key, sweep_fields);
    } else if (key == "out") {
      cfg.out = read_scalar<std::string>(entry.second, "out");
    } else {
      throw ConfigError("unknown key '" + key + "'" + where(entry.first));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace tsmfg::cli
