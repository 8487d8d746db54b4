#include "remest/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace remest {

void SimConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("sim: horizon must be >= 1");
  if (n_runs < 1) throw std::invalid_argument("sim: n_runs must be >= 1");
  if (!(burn_in >= 0 && burn_in < 1)) throw std::invalid_argument("sim: burn_in in [0,1)");
  if (!(divergence_guard > 0)) throw std::invalid_argument("sim: divergence guard invalid");
}

PolicyFn make_fixed_policy(int action_index) {
  return [action_index](const Matrix&, int) { return action_index; };
}

PolicyFn make_greedy_policy(const SystemModel& m, const ActionSet& as, double mu) {
  if (m.decoupled())
    return [m, as, mu](const Matrix& P, int) {
      return greedy_index_decoupled(psi_all(P, m), as, mu);
    };
  return [m, as, mu](const Matrix& P, int) { return greedy_index(P, m, as, mu); };
}

PolicyFn make_table_policy(const PolicyTable& table) {
  return [table](const Matrix& P, int) { return table.action_index[lookup_index(table, P)]; };
}

PolicyFn make_finite_horizon_policy(const std::vector<std::vector<int>>& plan,
                                    const PolicyTable& index_table) {
  if (plan.empty()) throw std::invalid_argument("finite-horizon policy: empty plan");
  return [plan, index_table](const Matrix& P, int) {
    return plan[0][lookup_index(index_table, P)];
  };
}

PolicyFn make_simple_tx_policy(const SystemModel& m, const ActionSet& single_set, double mu) {
  return [m, single_set, mu](const Matrix& P, int) {
    return baseline_simple_tx(P, m, single_set, mu);
  };
}

PolicyFn make_simple_rc_policy(const SystemModel& m, const ActionSet& grid_no_sic, double mu) {
  return [m, grid_no_sic, mu](const Matrix& P, int) {
    return baseline_simple_rc(P, m, grid_no_sic, mu);
  };
}

namespace {

struct RunResult {
  double sum_trace = 0, sum_power = 0, sum_sq_error = 0;
  std::vector<double> sum_arrivals;
  double discounted_cost = 0;
  long counted = 0;
  bool divergent = false;
  std::vector<TraceRow> trace;
};

Vector sample_gaussian_vector(const Matrix& cov_chol, RngStream& rng) {
  Vector z(cov_chol.rows());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.gaussian();
  return cov_chol * z;
}

RunResult simulate_one(const SystemModel& m, const ActionSet& as, const PolicyFn& policy,
                       const SimConfig& sim, int run, bool keep_trace) {
  const int n = m.n();
  const int N = m.n_sensors();
  const Matrix P0 = sim.P0.size() > 0 ? sim.P0 : Matrix::Identity(n, n);
  const Matrix P0_chol = Eigen::LLT<Matrix>(symmetrize(P0)).matrixL();
  const Matrix Q_chol = Eigen::LLT<Matrix>(
                            symmetrize(m.Q + 1e-14 * Matrix::Identity(n, n)))
                            .matrixL();
  std::vector<Matrix> R_chol(N);
  for (int i = 0; i < N; ++i)
    R_chol[i] = Eigen::LLT<Matrix>(symmetrize(m.sensors[i].R)).matrixL();

  const std::uint64_t base = static_cast<std::uint64_t>(run) * 4;
  RngStream rng_proc(sim.seed, base + 0);
  RngStream rng_meas(sim.seed, base + 1);
  RngStream rng_chan(sim.seed, base + 2);
  RngStream rng_init(sim.seed, base + 3);

  Vector x = sample_gaussian_vector(P0_chol, rng_init);
  EstimatorState est{Vector::Zero(n), symmetrize(m.A * P0 * m.A.transpose() + m.Q)};

  RunResult res;
  res.sum_arrivals.assign(N, 0.0);
  if (keep_trace) res.trace.reserve(sim.horizon);
  const int burn = static_cast<int>(sim.burn_in * sim.horizon);
  double beta_pow = 1.0;
  std::vector<Vector> y(N);

  for (int k = 0; k < sim.horizon; ++k) {
    const int a = policy(est.cov, k);
    const Action& u = as.actions[a];
    const auto prx = sample_received_powers(u, as.channel, rng_chan);
    const Outcome gamma = decode(prx, as.channel);
    for (int i = 0; i < N; ++i) {
      if (!(gamma & (1u << i))) continue;
      y[i] = m.sensors[i].C * x + sample_gaussian_vector(R_chol[i], rng_meas);
    }
    est = state_update(est, gamma, y, m);
    x = m.A * x + sample_gaussian_vector(Q_chol, rng_proc);

    double tr = est.cov.trace();
    if (!std::isfinite(tr) || tr > sim.divergence_guard) {
      res.divergent = true;
      tr = sim.divergence_guard;
    }
    if (keep_trace)
      res.trace.push_back({k, tr, u.total(), gamma});
    res.discounted_cost += beta_pow * (tr + sim.mu * u.total());
    beta_pow *= sim.beta;
    if (k >= burn) {
      res.sum_trace += tr;
      res.sum_power += u.total();
      const Vector err = x - est.xhat;
      res.sum_sq_error += std::min(err.squaredNorm(), sim.divergence_guard);
      for (int i = 0; i < N; ++i)
        if (gamma & (1u << i)) res.sum_arrivals[i] += 1.0;
      ++res.counted;
    }
    if (res.divergent) {
      // freeze remaining steps at the guard value instead of overflowing
      const long rest = sim.horizon - 1 - k;
      res.sum_trace += static_cast<double>(std::max<long>(0, rest - std::max(0, burn - k - 1))) *
                       sim.divergence_guard;
      res.counted += std::max<long>(0, rest - std::max(0, burn - k - 1));
      break;
    }
  }
  return res;
}

}  // namespace

SimMetrics run_simulation(const SystemModel& m, const ActionSet& as, const PolicyFn& policy,
                          const SimConfig& sim, bool parallel) {
  sim.validate();
  m.validate();
  const int N = m.n_sensors();
  std::vector<RunResult> runs(sim.n_runs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
  for (int r = 0; r < sim.n_runs; ++r)
    runs[r] = simulate_one(m, as, policy, sim, r, sim.record_trace && r == 0);

  SimMetrics out;
  out.arrival_rate.assign(N, 0.0);
  double cost_sum = 0, cost_sq = 0;
  long total_counted = 0;
  for (auto& r : runs) {
    out.mean_trace_cov += r.sum_trace;
    out.mean_power += r.sum_power;
    out.mean_sq_error += r.sum_sq_error;
    for (int i = 0; i < N; ++i) out.arrival_rate[i] += r.sum_arrivals[i];
    cost_sum += r.discounted_cost;
    cost_sq += r.discounted_cost * r.discounted_cost;
    total_counted += r.counted;
    out.divergent = out.divergent || r.divergent;
    if (!r.trace.empty()) out.trace = std::move(r.trace);
  }
  const double steps = std::max<long>(1, total_counted);
  out.mean_trace_cov /= steps;
  out.mean_power /= steps;
  out.mean_sq_error /= steps;
  for (auto& a : out.arrival_rate) a /= steps;
  out.discounted_cost_mean = cost_sum / sim.n_runs;
  if (sim.n_runs > 1) {
    const double var =
        (cost_sq - sim.n_runs * out.discounted_cost_mean * out.discounted_cost_mean) /
        (sim.n_runs - 1);
    out.discounted_cost_stderr = std::sqrt(std::max(0.0, var) / sim.n_runs);
  }
  return out;
}

std::vector<SweepPoint> sweep_mu(
    const std::function<PolicyFn(double mu)>& make_policy, const SystemModel& m,
    const ActionSet& as, const std::vector<double>& mu_grid, const SimConfig& sim) {
  if (mu_grid.empty()) throw std::invalid_argument("sweep: empty mu grid");
  std::vector<SweepPoint> pts;
  pts.reserve(mu_grid.size());
  for (double mu : mu_grid) {
    SweepPoint pt;
    pt.mu = mu;
    try {
      SimConfig s = sim;
      s.mu = mu;
      const PolicyFn policy = make_policy(mu);
      const SimMetrics metrics = run_simulation(m, as, policy, s);
      pt.mean_power = metrics.mean_power;
      pt.mean_trace = metrics.mean_trace_cov;
    } catch (const std::exception& e) {
      pt.ok = false;
      pt.error = e.what();
    }
    pts.push_back(std::move(pt));
  }
  std::sort(pts.begin(), pts.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.mean_power < b.mean_power; });
  return pts;
}

}  // namespace remest
