#include <chrono>
#include <cstdio>

#include "remest/scenario.hpp"

using namespace remest;

namespace {

double seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-24s serial %8.3f s   parallel %8.3f s   speedup %5.2fx\n", name, serial,
              parallel, serial / parallel);
}

}  // namespace

int main() {
  Scenario sc = two_drones();
  ActionSet as = ActionSet::full_grid(sc.channel, sc.solver.mc_samples, sc.solver.seed);

  {
    Action a = as.actions.back();
    const std::size_t n = 4000000;
    double ts = seconds([&] { arrival_distribution_mc(a, sc.channel, n, 1, false); });
    double tp = seconds([&] { arrival_distribution_mc(a, sc.channel, n, 1, true); });
    report("channel Monte Carlo", ts, tp);
  }

  SolverConfig cfg = sc.solver;
  cfg.n_centroids = 150;
  std::vector<Matrix> centroids = discretize_states(sc.model, as, cfg);
  {
    double ts = seconds([&] { value_iteration(centroids, sc.model, as, cfg, false); });
    double tp = seconds([&] { value_iteration(centroids, sc.model, as, cfg, true); });
    report("value iteration", ts, tp);
  }

  {
    SimConfig sim = sc.sim;
    sim.horizon = 20000;
    sim.n_runs = 8;
    sim.mu = cfg.mu;
    PolicyFn greedy = make_greedy_policy(sc.model, as, cfg.mu);
    double ts = seconds([&] { run_simulation(sc.model, as, greedy, sim, false); });
    double tp = seconds([&] { run_simulation(sc.model, as, greedy, sim, true); });
    report("closed-loop simulation", ts, tp);
  }
  return 0;
}
