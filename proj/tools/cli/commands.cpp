#include "cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <ostream>
#include <vector>

#include <CLI11.hpp>

#include "cli/output.hpp"
#include "tsmfg/tsmfg.hpp"

namespace tsmfg::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

FixedPointConfig fixed_point_config(const RunConfig& cfg) {
  FixedPointConfig fp;
  fp.damping = cfg.solver.damping;
  fp.tolerance = cfg.solver.tol;
  fp.max_iterations = cfg.solver.max_iterations;
  fp.steps = cfg.solver.mfg_steps;
  return fp;
}

NPlayerOptions nplayer_options(const RunConfig& cfg) {
  NPlayerOptions opt;
  opt.steps = cfg.solver.steps;
  return opt;
}

json base_summary(const RunConfig& cfg, std::string_view command) {
  json j;
  j["command"] = command;
  j["config"] = cfg.to_json();
  return j;
}

json monotonicity_json(const CostSpec& spec) {
  json j;
  const auto psi = check_monotonicity_psi(spec, 101);
  j["psi_monotone"] = psi.pass;
  j["psi_worst_value"] = psi.worst_value;
  j["psi_worst_pair"] = {psi.worst_x, psi.worst_y};
  try {
    const auto f = check_monotonicity_f(spec, 101);
    j["f_monotone"] = f.pass;
    j["f_gamma"] = f.gamma;
  } catch (const PreconditionError&) {
    j["f_monotone"] = nullptr;
    j["f_gamma"] = nullptr;
  }
  return j;
}

json max_principle_json(const MaxPrincipleReport& r) {
  return {{"bound", r.bound}, {"max_observed", r.max_observed}, {"worst_excess", r.worst_excess}, {"pass", r.pass}};
}

void write_outputs(const fs::path& dir) { fs::create_directories(dir); }

int cmd_solve_nplayer(const RunConfig& cfg) {
  const CostSpec spec = cfg.cost_spec();
  const NPlayerSolution sol = solve_nplayer(spec, cfg.sim.N, nplayer_options(cfg));

  std::vector<std::vector<std::string>> rows;
  rows.reserve((sol.steps() + 1) * 2 * static_cast<std::size_t>(sol.players() + 1));
  for (std::size_t k = 0; k <= sol.steps(); ++k) {
    const std::string t = format_double(sol.time_grid()[k]);
    for (int i = 0; i < 2; ++i) {
      for (int n = 0; n <= sol.players(); ++n) {
        rows.push_back({t, std::to_string(i), std::to_string(n), format_double(sol.u(i, n, k))});
      }
    }
  }

  json summary = base_summary(cfg, "solve-nplayer");
  summary["N"] = sol.players();
  summary["steps"] = sol.steps();
  summary["max_principle"] = max_principle_json(check_max_principle(sol, spec));
  const double lip = std::max(spec.psi[0].lipschitz_bound(), spec.psi[1].lipschitz_bound());
  if (lip > 0.0) {
    try {
      const auto g = check_gradient_bound(sol, lip);
      summary["gradient_bound"] = {{"C", lip},
                                   {"bound", g.bound},
                                   {"max_difference", g.max_difference},
                                   {"valid_horizon", g.valid_horizon},
                                   {"pass", g.pass}};
    } catch (const PreconditionError&) {
      summary["gradient_bound"] = nullptr;
    }
  }

  const fs::path dir(cfg.out);
  write_outputs(dir);
  write_csv(dir / "nplayer.csv", {"t", "i", "n", "u"}, rows);
  write_json(dir / "summary.json", summary);
  return kExitOk;
}

int cmd_solve_mfg(const RunConfig& cfg) {
  const CostSpec spec = cfg.cost_spec();
  const MeanFieldSolution mf = solve_mfg(spec, cfg.model.theta_bar, fixed_point_config(cfg));

  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < mf.time_grid.size(); ++k) {
    rows.push_back({format_double(mf.time_grid[k]), format_double(mf.theta[k]), format_double(mf.u[0][k]),
                    format_double(mf.u[1][k])});
  }
  const json mono = monotonicity_json(spec);
  json summary = base_summary(cfg, "solve-mfg");
  summary["iterations"] = mf.iterations;
  summary["residual"] = mf.residual;
  summary["defect_theta"] = mf.defect_theta;
  summary["defect_u"] = mf.defect_u;
  summary["monotonicity_psi"] = mono["psi_monotone"];
  summary["monotonicity_f_gamma"] = mono["f_gamma"];

  const fs::path dir(cfg.out);
  write_outputs(dir);
  write_csv(dir / "mfg.csv", {"t", "theta", "u0", "u1"}, rows);
  write_json(dir / "summary.json", summary);
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg) {
  const CostSpec spec = cfg.cost_spec();
  const MeanFieldSolution mf = solve_mfg(spec, cfg.model.theta_bar, fixed_point_config(cfg));
  auto sol = std::make_shared<const NPlayerSolution>(solve_nplayer(spec, cfg.sim.N, nplayer_options(cfg)));
  const EquilibriumControl control(sol, spec);

  SimConfig sim;
  sim.players = cfg.sim.N;
  sim.trials = cfg.sim.trials;
  sim.master_seed = cfg.sim.master_seed;
  sim.sample_times = uniform_sample_times(spec.horizon, cfg.sim.sample_times);
  sim.theta_bar = cfg.model.theta_bar;
  const ConvergenceEstimates est = estimate_convergence(*sol, mf, control, sim);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < est.sample_times.size(); ++s) {
    rows.push_back({format_double(est.sample_times[s]), format_double(est.V[s]), format_double(est.V_se[s]),
                    format_double(est.W0[s]), format_double(est.W0_se[s]), format_double(est.W1[s]),
                    format_double(est.W1_se[s]), format_double(est.Q[s])});
  }
  json summary = base_summary(cfg, "simulate");
  summary["master_seed"] = sim.master_seed;
  summary["trials"] = sim.trials;
  summary["N"] = sim.players;
  summary["sup_VQ"] = *std::max_element(est.VQ.begin(), est.VQ.end());
  summary["V0_expected"] = cfg.model.theta_bar * (1.0 - cfg.model.theta_bar) / sim.players;

  const fs::path dir(cfg.out);
  write_outputs(dir);
  write_csv(dir / "sim.csv", {"t", "V", "V_se", "W0", "W0_se", "W1", "W1_se", "Q"}, rows);
  write_json(dir / "summary.json", summary);
  return kExitOk;
}

int cmd_converge(const RunConfig& cfg, std::ostream& err) {
  const CostSpec spec = cfg.cost_spec();
  SweepConfig sweep;
  sweep.n_values = cfg.sweep.N;
  sweep.trials = cfg.sim.trials;
  sweep.master_seed = cfg.sim.master_seed;
  sweep.theta_bar = cfg.model.theta_bar;
  sweep.sample_count = cfg.sim.sample_times;
  sweep.nplayer = nplayer_options(cfg);
  sweep.fixed_point = fixed_point_config(cfg);
  const ConvergenceReport report = run_sweep(spec, sweep);

  std::vector<std::vector<std::string>> rows;
  json entries = json::array();
  for (const auto& e : report.entries) {
    if (e.ok) {
      rows.push_back({std::to_string(e.players), format_double(e.sup_vq), format_double(e.sup_vq_se)});
    } else {
      rows.push_back({std::to_string(e.players), "nan", "nan"});
      err << "N = " << e.players << " failed: " << e.error << '\n';
    }
    json je = {{"N", e.players}, {"ok", e.ok}, {"seed", e.seed}};
    if (e.ok) {
      je["sup_VQ"] = e.sup_vq;
      je["se"] = e.sup_vq_se;
      je["argmax_t"] = e.argmax_time;
      je["nplayer_steps"] = e.nplayer_steps;
    } else {
      je["error"] = e.error;
    }
    entries.push_back(je);
  }

  json conv;
  conv["config"] = cfg.to_json();
  conv["master_seed"] = cfg.sim.master_seed;
  conv["trials"] = cfg.sim.trials;
  conv["entries"] = entries;
  conv["mfg_iterations"] = report.mfg_iterations;
  conv["mfg_residual"] = report.mfg_residual;
  conv["envelope_constant"] = report.envelope_constant;
  conv["rho_bound_note"] = report.rho_bound_note;
  if (report.fit_ok) {
    conv["slope"] = report.fit.slope;
    conv["intercept"] = report.fit.intercept;
    conv["r_squared"] = report.fit.r_squared;
  } else {
    conv["slope"] = nullptr;
  }

  json summary = base_summary(cfg, "converge");
  summary["slope"] = conv["slope"];
  summary["outputs"] = {"convergence.csv", "convergence.json"};

  const fs::path dir(cfg.out);
  write_outputs(dir);
  write_csv(dir / "convergence.csv", {"N", "sup_VQ", "se"}, rows);
  write_json(dir / "convergence.json", conv);
  write_json(dir / "summary.json", summary);
  if (!report.fit_ok) {
    err << "rate fit failed: fewer than two N values succeeded\n";
    return kExitSolverFailure;
  }
  return kExitOk;
}

int cmd_check_monotonicity(const RunConfig& cfg) {
  json summary = base_summary(cfg, "check-monotonicity");
  summary.update(monotonicity_json(cfg.cost_spec()));
  const fs::path dir(cfg.out);
  write_outputs(dir);
  write_json(dir / "summary.json", summary);
  return kExitOk;
}

int cmd_verify_value(const RunConfig& cfg) {
  const CostSpec spec = cfg.cost_spec();
  auto sol = std::make_shared<const NPlayerSolution>(solve_nplayer(spec, cfg.sim.N, nplayer_options(cfg)));
  const EquilibriumControl control(sol, spec);
  SimConfig sim;
  sim.players = cfg.sim.N;
  sim.trials = cfg.sim.trials;
  sim.master_seed = cfg.sim.master_seed;
  sim.theta_bar = cfg.model.theta_bar;
  const ChainState start{cfg.sim.start_i, cfg.sim.resolved_start_n()};
  const ValueCheckReport r = verify_value_function(spec, control, sim, start, cfg.sim.start_t);

  json summary = base_summary(cfg, "verify-value");
  summary["start"] = {{"i", start.i}, {"n", start.n}, {"t", cfg.sim.start_t}};
  summary["estimate"] = r.estimate;
  summary["standard_error"] = r.standard_error;
  summary["solver_value"] = r.solver_value;
  summary["z_score"] = r.z_score;
  summary["pass"] = r.pass;
  const fs::path dir(cfg.out);
  write_outputs(dir);
  write_json(dir / "summary.json", summary);
  return kExitOk;
}

}  // namespace

void apply_overrides(RunConfig& cfg, const Overrides& overrides) {
  if (overrides.out) cfg.out = *overrides.out;
  if (overrides.seed) cfg.sim.master_seed = *overrides.seed;
  if (overrides.trials) cfg.sim.trials = *overrides.trials;
  if (overrides.N) cfg.sim.N = *overrides.N;
  cfg.validate();
}

int dispatch(const RunConfig& cfg, std::string_view command, std::ostream& err) {
  try {
    cfg.validate();
    if (command == "solve-nplayer") return cmd_solve_nplayer(cfg);
    if (command == "solve-mfg") return cmd_solve_mfg(cfg);
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "converge") return cmd_converge(cfg, err);
    if (command == "check-monotonicity") return cmd_check_monotonicity(cfg);
    if (command == "verify-value") return cmd_verify_value(cfg);
    err << "unknown command '" << command << "'\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const OutputError& e) {
    err << "output error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const Error& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const fs::filesystem_error& e) {
    err << "output error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int run(int argc, const char* const* argv, std::ostream& err) {
  CLI::App app{"Two-state mean field game solver and simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int trials = 0;
  int players = 0;
  std::vector<CLI::App*> subs;
  for (auto name : kCommands) {
    CLI::App* sub = app.add_subcommand(std::string(name));
    sub->add_option("--config", config_path, "Configuration file")->required();
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--trials", trials, "Monte Carlo trial count override");
    sub->add_option("--N", players, "Number of non-reference players override");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return kExitOk;
    }
    err << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Overrides overrides;
  if (chosen->count("--out")) overrides.out = out;
  if (chosen->count("--seed")) overrides.seed = seed;
  if (chosen->count("--trials")) overrides.trials = trials;
  if (chosen->count("--N")) overrides.N = players;

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  return dispatch(cfg, chosen->get_name(), err);
}

}  // namespace tsmfg::cli
