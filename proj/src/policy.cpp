#include "remest/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace remest {

double SolverConfig::resolved_vi_tol() const {
  if (vi_tol > 0) return vi_tol;
  return 1e-6 * (1.0 - beta) / (2.0 * beta);
}

void SolverConfig::validate(bool finite_horizon) const {
  if (finite_horizon ? !(beta > 0 && beta <= 1) : !(beta > 0 && beta < 1))
    throw std::invalid_argument("solver: beta out of range");
  if (!(mu >= 0)) throw std::invalid_argument("solver: mu must be >= 0");
  if (n_centroids < 1) throw std::invalid_argument("solver: n_centroids must be >= 1");
  if (vi_max_iters < 1) throw std::invalid_argument("solver: vi_max_iters must be >= 1");
  if (n_paths < 1 || path_length < 1)
    throw std::invalid_argument("solver: sample path configuration invalid");
  if (mc_samples < 1) throw std::invalid_argument("solver: mc_samples must be >= 1");
}

namespace {

void finalize_action_set(ActionSet& as, std::size_t mc_samples, std::uint64_t seed) {
  const int n = as.channel.n_sensors();
  as.dists.reserve(as.actions.size());
  as.marginals.reserve(as.actions.size());
  as.totals.reserve(as.actions.size());
  for (std::size_t k = 0; k < as.actions.size(); ++k) {
    as.dists.push_back(
        arrival_distribution(as.actions[k], as.channel, mc_samples, seed + k));
    std::vector<double> marg(n);
    for (int i = 0; i < n; ++i) marg[i] = as.dists.back().marginal_success(i);
    as.marginals.push_back(std::move(marg));
    as.totals.push_back(as.actions[k].total());
  }
}

}  // namespace

ActionSet ActionSet::full_grid(const ChannelParams& ch, std::size_t mc_samples,
                               std::uint64_t seed) {
  ch.validate();
  ActionSet as;
  as.channel = ch;
  const int n = ch.n_sensors();
  std::vector<int> idx(n, 0);
  while (true) {
    std::vector<double> powers(n);
    for (int i = 0; i < n; ++i) powers[i] = ch.power_sets[i][idx[i]];
    as.actions.push_back(Action(std::move(powers)));
    as.power_index.push_back(idx);
    int i = n - 1;
    for (; i >= 0; --i) {
      if (++idx[i] < static_cast<int>(ch.power_sets[i].size())) break;
      idx[i] = 0;
    }
    if (i < 0) break;
  }
  finalize_action_set(as, mc_samples, seed);
  return as;
}

ActionSet ActionSet::single_sensor_max(const ChannelParams& ch, std::size_t mc_samples,
                                       std::uint64_t seed) {
  ch.validate();
  ActionSet as;
  as.channel = ch;
  const int n = ch.n_sensors();
  as.actions.push_back(Action(std::vector<double>(n, 0.0)));
  as.power_index.push_back(std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i) {
    std::vector<double> powers(n, 0.0);
    std::vector<int> idx(n, 0);
    powers[i] = ch.max_power(i);
    idx[i] = static_cast<int>(ch.power_sets[i].size()) - 1;
    as.actions.push_back(Action(std::move(powers)));
    as.power_index.push_back(std::move(idx));
  }
  finalize_action_set(as, mc_samples, seed);
  return as;
}

bool action_preferred(double cost_a, double total_a, double cost_b, double total_b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  return total_a < total_b;  // equal totals keep the earlier candidate
}

int greedy_index(const Matrix& P, const SystemModel& m, const ActionSet& as, double mu) {
  int best = 0;
  double best_cost = expected_cost(P, as.actions[0], as.dists[0], mu, m);
  for (int k = 1; k < as.size(); ++k) {
    const double c = expected_cost(P, as.actions[k], as.dists[k], mu, m);
    if (action_preferred(c, as.totals[k], best_cost, as.totals[best])) {
      best = k;
      best_cost = c;
    }
  }
  return best;
}

Action greedy_action(const Matrix& P, const SystemModel& m, const ActionSet& as, double mu) {
  return as.actions[greedy_index(P, m, as, mu)];
}

int greedy_index_decoupled(const std::vector<double>& psis, const ActionSet& as, double mu) {
  // maximize sum_i psi_i p_i(u) - mu * total(u); the tie rule mirrors greedy_index
  int best = 0;
  auto score = [&](int k) {
    double v = -mu * as.totals[k];
    for (std::size_t i = 0; i < psis.size(); ++i) v += psis[i] * as.marginals[k][i];
    return v;
  };
  double best_score = score(0);
  for (int k = 1; k < as.size(); ++k) {
    const double v = score(k);
    if (action_preferred(-v, as.totals[k], -best_score, as.totals[best])) {
      best = k;
      best_score = v;
    }
  }
  return best;
}

double decoupled_surrogate(const Matrix& P, int action_index, const ActionSet& as, double mu,
                           const SystemModel& m) {
  if (!m.decoupled()) throw std::invalid_argument("surrogate: decoupled model required");
  const auto psis = psi_all(P, m);
  double v = -mu * as.totals[action_index];
  for (std::size_t i = 0; i < psis.size(); ++i) v += psis[i] * as.marginals[action_index][i];
  return v;
}

RegionThresholds thresholds(const ChannelParams& ch, double mu) {
  if (ch.n_sensors() != 2 || ch.power_sets[0].size() != 2 || ch.power_sets[1].size() != 2)
    throw std::invalid_argument("thresholds: two sensors with two power levels required");
  const double pmax1 = ch.max_power(0);
  const double pmax2 = ch.max_power(1);
  RegionThresholds th;
  th.q1 = arrival_distribution(Action({pmax1, 0.0}), ch).probs[0b01];
  th.q2 = arrival_distribution(Action({0.0, pmax2}), ch).probs[0b10];
  const auto both = arrival_distribution(Action({pmax1, pmax2}), ch);
  th.p1_11 = both.marginal_success(0);
  th.p2_11 = both.marginal_success(1);
  th.p_e = th.p1_11 * th.q1 + th.p2_11 * th.q2 - th.q1 * th.q2;
  if (!(th.p_e > 0)) throw std::runtime_error("thresholds: degenerate channel, p_e <= 0");
  th.M1 = mu * th.q2 / th.p_e;
  th.M2 = mu * th.q1 / th.p_e;
  return th;
}

Region classify_psi(double psi1, double psi2, const RegionThresholds& th, double mu) {
  const double a00_1 = psi1 - mu / th.q1;
  const double a00_2 = psi2 - mu / th.q2;
  const double a11_1 = (th.q1 - th.p1_11) * psi1 + mu - th.p2_11 * psi2;
  const double a11_2 = (th.q2 - th.p2_11) * psi2 + mu - th.p1_11 * psi1;
  const double diag = th.q1 * psi1 - th.q2 * psi2;
  if (a00_1 == 0 || a00_2 == 0 || a11_1 == 0 || a11_2 == 0) return Region::Boundary;
  if (a00_1 < 0 && a00_2 < 0) return Region::S00;
  if (a11_1 < 0 && a11_2 < 0) return Region::S11;
  if (diag == 0) return Region::Boundary;
  return diag > 0 ? Region::S10 : Region::S01;
}

Action corollary_region_action(const Matrix& P, const SystemModel& m, const ActionSet& as,
                               double mu) {
  if (!m.decoupled() || m.n_sensors() != 2)
    throw std::invalid_argument("corollary regions: decoupled two-sensor model required");
  if (as.size() != 4)
    throw std::invalid_argument("corollary regions: two power levels per sensor required");
  const auto th = thresholds(as.channel, mu);
  const auto psis = psi_all(P, m);
  const double pmax1 = as.channel.max_power(0);
  const double pmax2 = as.channel.max_power(1);
  switch (classify_psi(psis[0], psis[1], th, mu)) {
    case Region::S00: return Action({0.0, 0.0});
    case Region::S10: return Action({pmax1, 0.0});
    case Region::S01: return Action({0.0, pmax2});
    case Region::S11: return Action({pmax1, pmax2});
    case Region::Boundary: break;
  }
  return as.actions[greedy_index_decoupled(psis, as, mu)];
}

namespace {

Matrix random_initial_covariance(int n, RngStream& rng) {
  Matrix B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = rng.gaussian();
  const double scale = std::exp(3.0 * rng.uniform() - 1.0);  // spans ~0.37x .. 7.4x
  return symmetrize(scale * (B * B.transpose() / n) + 0.1 * Matrix::Identity(n, n));
}

Outcome sample_outcome(const ArrivalDistribution& d, RngStream& rng) {
  double u = rng.uniform();
  for (Outcome g = 0; g + 1 < d.size(); ++g) {
    u -= d[g];
    if (u < 0) return g;
  }
  return static_cast<Outcome>(d.size() - 1);
}

struct FlatPool {
  std::vector<Eigen::VectorXd> pts;  // matrices flattened row-major
  int n = 0;
};

double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm();
}

}  // namespace

std::vector<Matrix> discretize_states(const SystemModel& m, const ActionSet& as,
                                      const SolverConfig& cfg, bool* truncated) {
  cfg.validate(true);
  if (truncated) *truncated = false;
  const int n = m.n();

  std::vector<Eigen::VectorXd> pool(
      static_cast<std::size_t>(cfg.n_paths) * cfg.path_length);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int p = 0; p < cfg.n_paths; ++p) {
    RngStream rng(cfg.seed, 1000 + p);
    Matrix P = random_initial_covariance(n, rng);
    for (int k = 0; k < cfg.path_length; ++k) {
      const int a = static_cast<int>(rng.uniform() * as.size());
      const Outcome g = sample_outcome(as.dists[std::min(a, as.size() - 1)], rng);
      P = g_operator(P, g, m);
      pool[static_cast<std::size_t>(p) * cfg.path_length + k] =
          Eigen::Map<const Eigen::VectorXd>(P.data(), P.size());
    }
  }

  const int D = cfg.n_centroids;
  std::vector<Eigen::VectorXd> centroids;
  if (static_cast<int>(pool.size()) <= D) {
    centroids = pool;
    if (static_cast<int>(pool.size()) < D && truncated) *truncated = true;
  } else {
    // farthest-point seeding
    RngStream rng(cfg.seed, 7);
    centroids.reserve(D);
    centroids.push_back(pool[static_cast<std::size_t>(rng.uniform() * pool.size())]);
    std::vector<double> dmin(pool.size(), std::numeric_limits<double>::infinity());
    for (int c = 1; c < D; ++c) {
      std::size_t far = 0;
      double dfar = -1.0;
      for (std::size_t k = 0; k < pool.size(); ++k) {
        dmin[k] = std::min(dmin[k], sq_dist(pool[k], centroids.back()));
        if (dmin[k] > dfar) {
          dfar = dmin[k];
          far = k;
        }
      }
      centroids.push_back(pool[far]);
    }
    // Lloyd iterations; centroid update is the element-wise mean, which keeps
    // symmetry and positive semidefiniteness
    std::vector<int> assign(pool.size(), 0);
    for (int iter = 0; iter < 50; ++iter) {
      bool changed = false;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(|| : changed)
#endif
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(pool.size()); ++k) {
        int best = 0;
        double bd = sq_dist(pool[k], centroids[0]);
        for (int c = 1; c < D; ++c) {
          const double d = sq_dist(pool[k], centroids[c]);
          if (d < bd) {
            bd = d;
            best = c;
          }
        }
        if (assign[k] != best) {
          assign[k] = best;
          changed = true;
        }
      }
      if (!changed && iter > 0) break;
      std::vector<Eigen::VectorXd> sums(D, Eigen::VectorXd::Zero(n * n));
      std::vector<int> counts(D, 0);
      for (std::size_t k = 0; k < pool.size(); ++k) {
        sums[assign[k]] += pool[k];
        ++counts[assign[k]];
      }
      for (int c = 0; c < D; ++c)
        if (counts[c] > 0) centroids[c] = sums[c] / counts[c];  // empty: keep previous
    }
  }

  std::vector<Matrix> out(centroids.size());
  for (std::size_t c = 0; c < centroids.size(); ++c)
    out[c] = symmetrize(Eigen::Map<const Matrix>(centroids[c].data(), n, n));
  return out;
}

int nearest_centroid(const std::vector<Matrix>& centroids, const Matrix& P) {
  int best = 0;
  double bd = (centroids[0] - P).squaredNorm();
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = (centroids[c] - P).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace {

/// Per-centroid transition data: expected stage cost per action and the
/// centroid index reached under each arrival outcome.
struct DpTables {
  std::vector<std::vector<double>> cost;  // [centroid][action]
  std::vector<std::vector<int>> succ;     // [centroid][outcome]
};

DpTables build_dp_tables(const std::vector<Matrix>& centroids, const SystemModel& m,
                         const ActionSet& as, double mu, bool parallel) {
  const int D = static_cast<int>(centroids.size());
  const std::size_t n_out = as.dists[0].size();
  DpTables t;
  t.cost.assign(D, std::vector<double>(as.size(), 0.0));
  t.succ.assign(D, std::vector<int>(n_out, 0));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
  for (int c = 0; c < D; ++c) {
    std::vector<double> traces(n_out);
    for (Outcome g = 0; g < n_out; ++g) {
      const Matrix Pg = g_operator(centroids[c], g, m);
      traces[g] = Pg.trace();
      t.succ[c][g] = nearest_centroid(centroids, Pg);
    }
    for (int a = 0; a < as.size(); ++a) {
      double cost = mu * as.totals[a];
      for (Outcome g = 0; g < n_out; ++g) cost += as.dists[a][g] * traces[g];
      t.cost[c][a] = cost;
    }
  }
  return t;
}

/// One Bellman sweep; returns the sup-norm change.
double bellman_backup(const DpTables& t, const ActionSet& as, double beta,
                      const std::vector<double>& v, std::vector<double>& v_next,
                      std::vector<int>& u_next, bool parallel) {
  const int D = static_cast<int>(t.cost.size());
  const std::size_t n_out = t.succ[0].size();
  double delta = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(max : delta) if (parallel)
#endif
  for (int c = 0; c < D; ++c) {
    int best = 0;
    double best_q = std::numeric_limits<double>::infinity();
    for (int a = 0; a < as.size(); ++a) {
      double q = t.cost[c][a];
      for (Outcome g = 0; g < n_out; ++g)
        q += beta * as.dists[a][g] * v[t.succ[c][g]];
      if (action_preferred(q, as.totals[a], best_q, as.totals[best])) {
        best = a;
        best_q = q;
      }
    }
    u_next[c] = best;
    delta = std::max(delta, std::abs(best_q - v[c]));
    v_next[c] = best_q;
  }
  return delta;
}

}  // namespace

PolicyTable value_iteration(const std::vector<Matrix>& centroids, const SystemModel& m,
                            const ActionSet& as, const SolverConfig& cfg, bool parallel) {
  cfg.validate();
  if (centroids.empty()) throw std::invalid_argument("value_iteration: empty state set");
  const int D = static_cast<int>(centroids.size());
  const DpTables t = build_dp_tables(centroids, m, as, cfg.mu, parallel);

  PolicyTable table;
  table.centroids = centroids;
  table.config = cfg;
  table.receiver = as.channel.receiver;
  table.value.assign(D, 0.0);
  table.action_index.assign(D, 0);
  const double tol = cfg.resolved_vi_tol();
  std::vector<double> v_next(D);
  std::vector<int> u_next(D);
  for (int it = 0; it < cfg.vi_max_iters; ++it) {
    const double delta = bellman_backup(t, as, cfg.beta, table.value, v_next, u_next, parallel);
    table.value.swap(v_next);
    table.action_index.swap(u_next);
    table.deltas.push_back(delta);
    table.iterations = it + 1;
    table.final_delta = delta;
    if (delta <= tol) {
      table.converged = true;
      break;
    }
  }
  return table;
}

double bellman_residual(const PolicyTable& table, const SystemModel& m, const ActionSet& as) {
  const DpTables t = build_dp_tables(table.centroids, m, as, table.config.mu, true);
  std::vector<double> v_next(table.centroids.size());
  std::vector<int> u_next(table.centroids.size());
  return bellman_backup(t, as, table.config.beta, table.value, v_next, u_next, true);
}

std::vector<std::vector<int>> finite_horizon_dp(const std::vector<Matrix>& centroids, int K,
                                                const SystemModel& m, const ActionSet& as,
                                                const SolverConfig& cfg) {
  cfg.validate(true);
  if (K < 1) throw std::invalid_argument("finite_horizon_dp: K must be >= 1");
  const int D = static_cast<int>(centroids.size());
  const DpTables t = build_dp_tables(centroids, m, as, cfg.mu, true);
  std::vector<std::vector<int>> plan(K, std::vector<int>(D, 0));
  std::vector<double> v(D, 0.0), v_next(D);
  for (int k = K - 1; k >= 0; --k) {
    bellman_backup(t, as, cfg.beta, v, v_next, plan[k], true);
    v_next.swap(v);
    // bellman_backup measures delta against the previous iterate, which is the
    // stage-(k+1) value here; only the minimizers and values are needed
  }
  return plan;
}

int lookup_index(const PolicyTable& table, const Matrix& P) {
  if (table.centroids.empty()) throw std::invalid_argument("lookup: empty table");
  return nearest_centroid(table.centroids, P);
}

Action lookup(const PolicyTable& table, const ActionSet& as, const Matrix& P) {
  return as.actions[table.action_index[lookup_index(table, P)]];
}

int baseline_simple_tx(const Matrix& P, const SystemModel& m, const ActionSet& single_set,
                       double mu) {
  if (single_set.size() != m.n_sensors() + 1)
    throw std::invalid_argument("simple_tx: expected the one-at-max action set");
  if (m.decoupled()) return greedy_index_decoupled(psi_all(P, m), single_set, mu);
  return greedy_index(P, m, single_set, mu);
}

int baseline_simple_rc(const Matrix& P, const SystemModel& m, const ActionSet& grid_no_sic,
                       double mu) {
  if (grid_no_sic.channel.receiver != Receiver::Simple)
    throw std::invalid_argument("simple_rc: Simple receiver required");
  if (m.decoupled()) return greedy_index_decoupled(psi_all(P, m), grid_no_sic, mu);
  return greedy_index(P, m, grid_no_sic, mu);
}

}  // namespace remest
