#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "remest/estimator.hpp"

namespace remest {

struct SolverConfig {
  double beta = 0.9;            // discount factor
  double mu = 0.1;              // power price
  int n_centroids = 200;        // D
  double vi_tol = -1.0;         // <= 0: use the default epsilon-optimality rule
  int vi_max_iters = 20000;
  int n_paths = 50;             // discretization sample paths
  int path_length = 400;
  std::uint64_t seed = 1;
  std::size_t mc_samples = 1000000;

  double resolved_vi_tol() const;
  void validate(bool finite_horizon = false) const;
};

/// The full action grid (or a restricted set) with its arrival distributions
/// and per-action marginals precomputed. Enumeration is lexicographic over
/// power indices with sensor 0 most significant; tie-breaking relies on it.
struct ActionSet {
  ChannelParams channel;
  std::vector<Action> actions;
  std::vector<std::vector<int>> power_index;  // per action, per sensor
  std::vector<ArrivalDistribution> dists;
  std::vector<std::vector<double>> marginals;  // p_i(u) per action
  std::vector<double> totals;                  // total power per action

  int size() const { return static_cast<int>(actions.size()); }

  /// Cartesian product of the per-sensor power sets.
  static ActionSet full_grid(const ChannelParams& ch, std::size_t mc_samples = 1000000,
                             std::uint64_t seed = 1);

  /// All-silent plus one-sensor-at-max actions (the "Simple tx" baseline set).
  static ActionSet single_sensor_max(const ChannelParams& ch, std::size_t mc_samples = 1000000,
                                     std::uint64_t seed = 1);
};

/// True when `a` is preferred over the incumbent `b` under the global tie
/// rule: lower cost, then lower total power, then earlier enumeration order.
bool action_preferred(double cost_a, double total_a, double cost_b, double total_b);

/// Full-grid one-step minimizer of the expected cost.
int greedy_index(const Matrix& P, const SystemModel& m, const ActionSet& as, double mu);
Action greedy_action(const Matrix& P, const SystemModel& m, const ActionSet& as, double mu);

/// Decoupled fast path: same argmin computed through the per-block psi values.
int greedy_index_decoupled(const std::vector<double>& psis, const ActionSet& as, double mu);

/// Prop.-3 surrogate sum_i psi_i(P_i) p_i(u) - mu sum_i u_i; maximizing it over
/// u reproduces the greedy action on decoupled models.
double decoupled_surrogate(const Matrix& P, int action_index, const ActionSet& as, double mu,
                           const SystemModel& m);

//
// Two-sensor, two-level threshold regions
//

struct RegionThresholds {
  double M1 = 0, M2 = 0;  // psi-plane corner coordinates
  double p_e = 0;
  double q1 = 0, q2 = 0;      // p_10(Pmax,0), p_01(0,Pmax)
  double p1_11 = 0, p2_11 = 0;  // marginals at (Pmax,Pmax)
};

/// Requires N = 2 with two power levels each. Throws on a degenerate channel
/// (p_e <= 0).
RegionThresholds thresholds(const ChannelParams& ch, double mu);

enum class Region { S00, S01, S10, S11, Boundary };

/// Classifies a (psi_1, psi_2) point by the strict region inequalities;
/// Boundary when an equality is hit.
Region classify_psi(double psi1, double psi2, const RegionThresholds& th, double mu);

/// Region classifier mapped back to an action; boundary points fall back to
/// the greedy tie rule.
Action corollary_region_action(const Matrix& P, const SystemModel& m, const ActionSet& as,
                               double mu);

//
// State discretization and dynamic programming
//

/// Simulates covariance sample paths under uniformly random actions and
/// arrivals drawn from the true per-action distributions, pools the visited
/// matrices and reduces them to cfg.n_centroids k-means centroids under the
/// Frobenius distance. Deterministic given cfg.seed.
std::vector<Matrix> discretize_states(const SystemModel& m, const ActionSet& as,
                                      const SolverConfig& cfg, bool* truncated = nullptr);

/// Nearest centroid by Frobenius distance, ties by lower index.
int nearest_centroid(const std::vector<Matrix>& centroids, const Matrix& P);

struct PolicyTable {
  std::vector<Matrix> centroids;
  std::vector<int> action_index;
  std::vector<double> value;
  SolverConfig config;
  Receiver receiver = Receiver::Simple;
  int iterations = 0;
  double final_delta = 0.0;
  bool converged = false;
  std::vector<double> deltas;  // sup-norm change per sweep
};

/// Discounted value iteration over the discretized chain (successors projected
/// to their nearest centroid). Backups within a sweep run in parallel.
PolicyTable value_iteration(const std::vector<Matrix>& centroids, const SystemModel& m,
                            const ActionSet& as, const SolverConfig& cfg, bool parallel = true);

/// max_P |V(P) - (TV)(P)| of a solved table.
double bellman_residual(const PolicyTable& table, const SystemModel& m, const ActionSet& as);

/// Backward recursion from V_K = 0; element k of the result maps centroids to
/// the action of stage k (k = 0 acts first). K = 1 reduces to greedy.
std::vector<std::vector<int>> finite_horizon_dp(const std::vector<Matrix>& centroids, int K,
                                                const SystemModel& m, const ActionSet& as,
                                                const SolverConfig& cfg);

int lookup_index(const PolicyTable& table, const Matrix& P);
Action lookup(const PolicyTable& table, const ActionSet& as, const Matrix& P);

//
// Literature baselines
//

/// Greedy over {silent, one sensor at max power}; pair with a Simple-receiver
/// ActionSet built by ActionSet::single_sensor_max.
int baseline_simple_tx(const Matrix& P, const SystemModel& m, const ActionSet& single_set,
                       double mu);

/// Greedy over the full grid without SIC; pair with a Simple-receiver grid.
int baseline_simple_rc(const Matrix& P, const SystemModel& m, const ActionSet& grid_no_sic,
                       double mu);

//
// Serialization
//

void save_policy(std::ostream& os, const PolicyTable& table, const ActionSet& as);
void save_policy_file(const std::string& path, const PolicyTable& table, const ActionSet& as);

/// Reads a policy table; action indices are validated against `as`.
PolicyTable load_policy(std::istream& is, const ActionSet& as);
PolicyTable load_policy_file(const std::string& path, const ActionSet& as);

}  // namespace remest
