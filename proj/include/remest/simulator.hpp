#pragma once

#include <functional>
#include <string>
#include <vector>

#include "remest/policy.hpp"

namespace remest {

struct SimConfig {
  int horizon = 100000;
  int n_runs = 10;
  std::uint64_t seed = 1;
  double burn_in = 0.1;          // fraction of the horizon dropped from averages
  bool record_trace = false;     // keep the per-step trace of run 0
  double beta = 0.9;             // discount for the cost metric
  double mu = 0.0;
  Matrix P0;                     // empty: identity
  double divergence_guard = 1e12;

  void validate() const;
};

struct TraceRow {
  int step;
  double trace_P;
  double total_power;
  Outcome gamma;
};

struct SimMetrics {
  double mean_trace_cov = 0.0;   // mean Tr P(k+1|k) past burn-in
  double mean_power = 0.0;
  double mean_sq_error = 0.0;    // empirical Tr of the prediction error outer product
  std::vector<double> arrival_rate;
  double discounted_cost_mean = 0.0;    // per-run mean of sum beta^k (Tr P + mu u)
  double discounted_cost_stderr = 0.0;
  bool divergent = false;
  std::vector<TraceRow> trace;
};

/// Maps the predicted covariance and step index to an action index.
using PolicyFn = std::function<int(const Matrix&, int)>;

PolicyFn make_fixed_policy(int action_index);
PolicyFn make_greedy_policy(const SystemModel& m, const ActionSet& as, double mu);
PolicyFn make_table_policy(const PolicyTable& table);
/// Receding-horizon use of a finite-horizon plan: the stage-0 map is applied
/// at every step.
PolicyFn make_finite_horizon_policy(const std::vector<std::vector<int>>& plan,
                                    const PolicyTable& index_table);
PolicyFn make_simple_tx_policy(const SystemModel& m, const ActionSet& single_set, double mu);
PolicyFn make_simple_rc_policy(const SystemModel& m, const ActionSet& grid_no_sic, double mu);

/// Closed-loop simulation: evolve the plant, allocate power, push packets
/// through the fading channel, update the estimator, aggregate metrics.
/// Replications run on independent seeded streams; results do not depend on
/// the thread count.
SimMetrics run_simulation(const SystemModel& m, const ActionSet& as, const PolicyFn& policy,
                          const SimConfig& sim, bool parallel = true);

struct SweepPoint {
  double mu = 0.0;
  double mean_power = 0.0;
  double mean_trace = 0.0;
  bool ok = true;
  std::string error;
};

/// For each mu: build the policy, simulate, emit one curve point. Points are
/// sorted by mean power; per-point failures are recorded and the sweep
/// continues.
std::vector<SweepPoint> sweep_mu(
    const std::function<PolicyFn(double mu)>& make_policy, const SystemModel& m,
    const ActionSet& as, const std::vector<double>& mu_grid, const SimConfig& sim);

}  // namespace remest
