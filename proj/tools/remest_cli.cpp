#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "remest/scenario.hpp"
#include "remest/stability.hpp"

namespace fs = std::filesystem;
using namespace remest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNoConverge = 3;

struct CommonOpts {
  std::string config = "two_drones";
  std::string out_dir = ".";
  std::uint64_t seed = 0;  // 0: keep the scenario's seeds
  std::size_t samples = 0; // 0: keep the scenario's sample count
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config, "preset name or JSON config path");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "override every RNG seed (0 keeps config seeds)");
  cmd->add_option("--samples", o.samples, "override the Monte Carlo sample count");
}

Scenario load_with_overrides(const CommonOpts& o) {
  Scenario sc = load_scenario(o.config);
  if (o.seed != 0) {
    sc.solver.seed = o.seed;
    sc.sim.seed = o.seed;
  }
  if (o.samples != 0) sc.solver.mc_samples = o.samples;
  return sc;
}

std::ofstream open_out(const CommonOpts& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  const fs::path p = fs::path(o.out_dir) / name;
  std::ofstream os(p);
  if (!os) throw ConfigError("out-dir", "cannot write " + p.string());
  std::cout << "wrote " << p.string() << "\n";
  return os;
}

std::string action_label(const Action& a) {
  std::ostringstream ss;
  for (int i = 0; i < a.n(); ++i) {
    if (i) ss << ':';
    ss << a.powers[i];
  }
  return ss.str();
}

int cmd_probs(const CommonOpts& o) {
  Scenario sc = load_with_overrides(o);
  ActionSet as = ActionSet::full_grid(sc.channel, sc.solver.mc_samples, sc.solver.seed);
  std::ofstream os = open_out(o, "probs.csv");
  os << "action, gamma_bits, probability\n";
  for (int a = 0; a < as.size(); ++a)
    for (Outcome g = 0; g < as.dists[a].size(); ++g)
      os << action_label(as.actions[a]) << ", " << g << ", " << as.dists[a][g] << "\n";
  return kExitOk;
}

int cmd_solve(const CommonOpts& o, const std::string& out_file, int finite_k) {
  Scenario sc = load_with_overrides(o);
  ActionSet as = ActionSet::full_grid(sc.channel, sc.solver.mc_samples, sc.solver.seed);
  std::vector<Matrix> centroids = discretize_states(sc.model, as, sc.solver);
  if (finite_k > 0) {
    auto plan = finite_horizon_dp(centroids, finite_k, sc.model, as, sc.solver);
    std::ofstream os = open_out(o, out_file.empty() ? "plan.csv" : out_file);
    os << "stage, centroid, action\n";
    for (std::size_t k = 0; k < plan.size(); ++k)
      for (std::size_t c = 0; c < plan[k].size(); ++c)
        os << k << ", " << c << ", " << action_label(as.actions[plan[k][c]]) << "\n";
    return kExitOk;
  }
  PolicyTable table = value_iteration(centroids, sc.model, as, sc.solver);
  std::cout << "value iteration: " << table.iterations << " sweeps, final delta "
            << table.final_delta << (table.converged ? "" : " (NOT converged)") << "\n";
  fs::create_directories(o.out_dir);
  const fs::path p = fs::path(o.out_dir) / (out_file.empty() ? "policy.txt" : out_file);
  save_policy_file(p.string(), table, as);
  std::cout << "wrote " << p.string() << "\n";
  return table.converged ? kExitOk : kExitNoConverge;
}

PolicyFn build_policy(const std::string& name, const Scenario& sc, const ActionSet& as,
                      ActionSet& aux, double mu) {
  if (name == "greedy") return make_greedy_policy(sc.model, as, mu);
  if (name == "simple_tx") {
    ChannelParams ch = sc.channel;
    ch.receiver = Receiver::Simple;
    aux = ActionSet::single_sensor_max(ch, sc.solver.mc_samples, sc.solver.seed);
    return make_simple_tx_policy(sc.model, aux, mu);
  }
  if (name == "simple_rc") {
    ChannelParams ch = sc.channel;
    ch.receiver = Receiver::Simple;
    aux = ActionSet::full_grid(ch, sc.solver.mc_samples, sc.solver.seed);
    return make_simple_rc_policy(sc.model, aux, mu);
  }
  if (name.rfind("table:", 0) == 0) {
    PolicyTable table = load_policy_file(name.substr(6), as);
    return make_table_policy(table);
  }
  throw ConfigError("policy", "unknown policy '" + name +
                                  "' (greedy, simple_tx, simple_rc, table:FILE)");
}

int cmd_simulate(const CommonOpts& o, const std::string& policy_name, double mu_flag,
                 bool trace) {
  Scenario sc = load_with_overrides(o);
  const double mu = mu_flag >= 0 ? mu_flag : sc.solver.mu;
  ActionSet as = ActionSet::full_grid(sc.channel, sc.solver.mc_samples, sc.solver.seed);
  ActionSet aux;
  PolicyFn policy = build_policy(policy_name, sc, as, aux, mu);
  const ActionSet& run_set =
      (policy_name == "simple_tx" || policy_name == "simple_rc") ? aux : as;
  SimConfig sim = sc.sim;
  sim.mu = mu;
  sim.record_trace = trace;
  SimMetrics met = run_simulation(sc.model, run_set, policy, sim);

  const std::string tag = policy_name.rfind("table:", 0) == 0 ? "table" : policy_name;
  std::ofstream os = open_out(o, "metrics_" + tag + ".txt");
  os << "policy " << policy_name << "\n"
     << "mu " << mu << "\n"
     << "mean_trace_cov " << met.mean_trace_cov << "\n"
     << "mean_power " << met.mean_power << "\n"
     << "mean_sq_error " << met.mean_sq_error << "\n"
     << "discounted_cost_mean " << met.discounted_cost_mean << "\n"
     << "discounted_cost_stderr " << met.discounted_cost_stderr << "\n"
     << "divergent " << (met.divergent ? 1 : 0) << "\n";
  for (std::size_t i = 0; i < met.arrival_rate.size(); ++i)
    os << "arrival_rate_" << i << " " << met.arrival_rate[i] << "\n";
  if (trace) {
    std::ofstream ts = open_out(o, "trace_" + tag + ".csv");
    ts << "step, trace_P, total_power, gamma_bits\n";
    for (const auto& row : met.trace)
      ts << row.step << ", " << row.trace_P << ", " << row.total_power << ", " << row.gamma
         << "\n";
  }
  std::cout << "mean trace " << met.mean_trace_cov << ", mean power " << met.mean_power
            << "\n";
  return met.divergent ? kExitNoConverge : kExitOk;
}

int cmd_sweep(const CommonOpts& o, const std::vector<std::string>& policies,
              std::vector<double> mu_grid) {
  Scenario sc = load_with_overrides(o);
  if (mu_grid.empty())
    mu_grid = {0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  ActionSet as = ActionSet::full_grid(sc.channel, sc.solver.mc_samples, sc.solver.seed);
  for (const std::string& name : policies) {
    ActionSet aux;
    const bool uses_aux = name == "simple_tx" || name == "simple_rc";
    auto make = [&](double mu) { return build_policy(name, sc, as, aux, mu); };
    // build once to populate aux before choosing the action set
    make(mu_grid.front());
    const ActionSet& run_set = uses_aux ? aux : as;
    auto points = sweep_mu(make, sc.model, run_set, mu_grid, sc.sim);
    std::ofstream os = open_out(o, "sweep_" + name + ".csv");
    os << "mu, mean_power, mean_trace\n";
    for (const auto& pt : points) {
      if (!pt.ok) {
        std::cerr << "sweep " << name << " mu=" << pt.mu << " failed: " << pt.error << "\n";
        continue;
      }
      os << pt.mu << ", " << pt.mean_power << ", " << pt.mean_trace << "\n";
    }
  }
  return kExitOk;
}

int cmd_stability(const CommonOpts& o, bool trace) {
  Scenario sc = load_with_overrides(o);
  StabilityReport rep = search_best_subset(sc.model, sc.channel,
                                           sc.solver.mc_samples, sc.solver.seed);
  std::cout << "subset J = {";
  for (std::size_t i = 0; i < rep.J.size(); ++i) std::cout << (i ? "," : "") << rep.J[i];
  std::cout << "}\n";
  std::printf("  detectable      %s\n", rep.detectable ? "yes" : "no");
  std::printf("  reachable       %s\n", rep.reachable ? "yes" : "no");
  std::printf("  p_mp            %.6f\n", rep.p_mp);
  std::printf("  p_wc            %.6f\n", rep.p_wc);
  std::printf("  Lambda(A)       %.6f\n", rep.lambda_A);
  std::printf("  Lambda(A^|J|)   %.6f\n", rep.lambda_A_pow);
  std::printf("  condition 1     %s\n", rep.cond1 ? "satisfied" : "not satisfied");
  std::printf("  condition 2     %s\n", rep.cond2 ? "satisfied" : "not satisfied");
  std::printf("  Riccati bounded %s\n", rep.riccati_bounded ? "yes" : "no");
  if (trace) {
    std::ofstream os = open_out(o, "riccati_trace.csv");
    os << "iter, trace\n";
    for (std::size_t k = 0; k < rep.trace_trajectory.size(); ++k)
      os << k << ", " << rep.trace_trajectory[k] << "\n";
  }
  return kExitOk;
}

int cmd_regions(const CommonOpts& o, double mu_flag, int grid_n, double max_trace) {
  Scenario sc = load_with_overrides(o);
  const double mu = mu_flag >= 0 ? mu_flag : sc.solver.mu;
  if (sc.model.n_sensors() != 2 || !sc.model.decoupled())
    throw ConfigError("model", "regions needs a two-sensor decoupled model");
  // two-level channel: silent or max power per sensor
  ChannelParams ch = sc.channel;
  for (auto& ps : ch.power_sets) ps = {0.0, ps.back()};
  RegionThresholds th = thresholds(ch, mu);
  std::cout << "M1 " << th.M1 << "  M2 " << th.M2 << "  p_e " << th.p_e << "\n";
  std::ofstream os = open_out(o, "regions.csv");
  os << "trace_P1, trace_P2, psi_1, psi_2, region\n";
  static const char* names[] = {"S00", "S01", "S10", "S11", "boundary"};
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      const double t1 = max_trace * (i + 1) / grid_n;
      const double t2 = max_trace * (j + 1) / grid_n;
      const int nb = sc.model.blocks[0];
      Matrix P = Matrix::Zero(sc.model.n(), sc.model.n());
      P.topLeftCorner(nb, nb) = (t1 / nb) * Matrix::Identity(nb, nb);
      P.bottomRightCorner(nb, nb) = (t2 / nb) * Matrix::Identity(nb, nb);
      const auto psis = psi_all(P, sc.model);
      Region r = classify_psi(psis[0], psis[1], th, mu);
      os << t1 << ", " << t2 << ", " << psis[0] << ", " << psis[1] << ", "
         << names[static_cast<int>(r)] << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"remote estimation power allocation toolkit"};
  app.require_subcommand(1);

  CommonOpts probs_o, solve_o, sim_o, sweep_o, stab_o, reg_o;
  std::string solve_out;
  int finite_k = 0;
  std::string sim_policy = "greedy";
  double sim_mu = -1.0;
  bool sim_trace = false;
  std::vector<std::string> sweep_policies = {"greedy"};
  std::vector<double> sweep_grid;
  bool stab_trace = false;
  double reg_mu = -1.0;
  int reg_grid = 60;
  double reg_max_trace = 40.0;

  auto* probs = app.add_subcommand("probs", "arrival distributions for every action");
  add_common(probs, probs_o);

  auto* solve = app.add_subcommand("solve", "solve the MDP and write the policy table");
  add_common(solve, solve_o);
  solve->add_option("-o,--out", solve_out, "policy file name");
  solve->add_option("--finite-horizon", finite_k, "solve a K-stage plan instead");

  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation of one policy");
  add_common(simulate, sim_o);
  simulate->add_option("-p,--policy", sim_policy,
                       "greedy | simple_tx | simple_rc | table:FILE");
  simulate->add_option("--mu", sim_mu, "power price (default: config value)");
  simulate->add_flag("--trace", sim_trace, "write the per-step trace CSV");

  auto* sweep = app.add_subcommand("sweep", "power/trace tradeoff curves over mu");
  add_common(sweep, sweep_o);
  sweep->add_option("-p,--policy", sweep_policies, "policies to sweep");
  sweep->add_option("--mu-grid", sweep_grid, "mu values");

  auto* stability = app.add_subcommand("stability", "sufficient stability conditions");
  add_common(stability, stab_o);
  stability->add_flag("--trace", stab_trace, "write the Riccati trace CSV");

  auto* regions = app.add_subcommand("regions", "optimal-action regions over a trace grid");
  add_common(regions, reg_o);
  regions->add_option("--mu", reg_mu, "power price (default: config value)");
  regions->add_option("--grid", reg_grid, "grid points per axis");
  regions->add_option("--max-trace", reg_max_trace, "largest per-system trace");

  CLI11_PARSE(app, argc, argv);

  try {
    if (probs->parsed()) return cmd_probs(probs_o);
    if (solve->parsed()) return cmd_solve(solve_o, solve_out, finite_k);
    if (simulate->parsed()) return cmd_simulate(sim_o, sim_policy, sim_mu, sim_trace);
    if (sweep->parsed()) return cmd_sweep(sweep_o, sweep_policies, sweep_grid);
    if (stability->parsed()) return cmd_stability(stab_o, stab_trace);
    if (regions->parsed()) return cmd_regions(reg_o, reg_mu, reg_grid, reg_max_trace);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
