#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "remest/policy.hpp"
#include "remest/scenario.hpp"

using namespace remest;

namespace {

Matrix random_block_cov(const SystemModel& m, RngStream& rng, double scale = 1.0) {
  Matrix P = Matrix::Zero(m.n(), m.n());
  for (int i = 0; i < m.n_sensors(); ++i) {
    const int nb = m.blocks[i];
    Matrix B(nb, nb);
    for (int r = 0; r < nb; ++r)
      for (int c = 0; c < nb; ++c) B(r, c) = rng.gaussian();
    P.block(m.block_offset(i), m.block_offset(i), nb, nb) =
        scale * std::exp(3 * rng.uniform() - 1) * (B * B.transpose() / nb) +
        0.1 * Matrix::Identity(nb, nb);
  }
  return P;
}

struct Fixture {
  Scenario sc = two_drones();
  ActionSet as = ActionSet::full_grid(sc.channel, 200000, 1);
};

}  // namespace

TEST_CASE("full grid enumeration is lexicographic") {
  Fixture f;
  CHECK(f.as.size() == 16);
  CHECK(f.as.actions[0].powers == std::vector<double>{0.0, 0.0});
  CHECK(f.as.power_index[1] == std::vector<int>{0, 1});
  CHECK(f.as.power_index[4] == std::vector<int>{1, 0});
  CHECK(f.as.power_index[15] == std::vector<int>{3, 3});
  CHECK(f.as.totals[15] == doctest::Approx(2.0));
}

TEST_CASE("simple tx action set has 1 + N elements") {
  ChannelParams ch = two_drones().channel;
  ch.receiver = Receiver::Simple;
  ActionSet s = ActionSet::single_sensor_max(ch, 100000, 1);
  CHECK(s.size() == 3);
  CHECK(s.actions[0].total() == 0.0);
  CHECK(s.actions[1].powers == std::vector<double>{1.0, 0.0});
  CHECK(s.actions[2].powers == std::vector<double>{0.0, 1.0});
}

TEST_CASE("huge mu forces silence, mu=0 with huge P sends max power") {
  Fixture f;
  RngStream rng(1, 0);
  Matrix P = random_block_cov(f.sc.model, rng);
  CHECK(greedy_index(P, f.sc.model, f.as, 1e9) == 0);
  Matrix Pbig = 1e4 * Matrix::Identity(4, 4);
  int a = greedy_index(Pbig, f.sc.model, f.as, 0.0);
  CHECK(f.as.actions[a].powers == std::vector<double>{1.0, 1.0});
}

TEST_CASE("decoupled fast path equals the brute-force greedy") {
  Fixture f;
  RngStream rng(2, 0);
  for (int t = 0; t < 200; ++t) {
    Matrix P = random_block_cov(f.sc.model, rng, 1 + 5 * rng.uniform());
    const double mu = rng.uniform();
    const int brute = greedy_index(P, f.sc.model, f.as, mu);
    const int fast = greedy_index_decoupled(psi_all(P, f.sc.model), f.as, mu);
    CHECK(brute == fast);
  }
}

TEST_CASE("surrogate ordering mirrors expected cost") {
  Fixture f;
  RngStream rng(3, 0);
  for (int t = 0; t < 1000; ++t) {
    Matrix P = random_block_cov(f.sc.model, rng);
    const double mu = rng.uniform();
    const int u = static_cast<int>(rng.uniform() * f.as.size());
    const int v = static_cast<int>(rng.uniform() * f.as.size());
    const double su = decoupled_surrogate(P, u, f.as, mu, f.sc.model);
    const double sv = decoupled_surrogate(P, v, f.as, mu, f.sc.model);
    const double cu = expected_cost(P, f.as.actions[u], f.as.dists[u], mu, f.sc.model);
    const double cv = expected_cost(P, f.as.actions[v], f.as.dists[v], mu, f.sc.model);
    if (su > sv + 1e-9) CHECK(cu < cv);
    if (su < sv - 1e-9) CHECK(cu > cv);
  }
}

TEST_CASE("surrogate of the silent action at mu=0 is zero and symmetric") {
  Fixture f;
  Matrix P = Matrix::Identity(4, 4);
  CHECK(decoupled_surrogate(P, 0, f.as, 0.0, f.sc.model) == doctest::Approx(0.0).scale(1));
  // symmetric P: swapping the sensors of an action leaves the surrogate fixed
  const double s1 = decoupled_surrogate(P, 1, f.as, 0.3, f.sc.model);  // (0, p1)
  const double s2 = decoupled_surrogate(P, 4, f.as, 0.3, f.sc.model);  // (p1, 0)
  CHECK(s1 == doctest::Approx(s2).epsilon(1e-9));
}

TEST_CASE("greedy power component monotone along block inflation") {
  // scaling a block inflates its psi, so the greedy allocation to that sensor
  // can only grow; arbitrary PSD increases do not guarantee this (psi itself
  // is not monotone under the semidefinite order, see the estimator tests)
  Fixture f;
  RngStream rng(4, 0);
  for (int t = 0; t < 500; ++t) {
    Matrix P = random_block_cov(f.sc.model, rng);
    Matrix Pbar = P;
    Pbar.topLeftCorner(2, 2) *= 1 + 3 * rng.uniform();
    const double mu = 0.01 + rng.uniform();
    Action u = greedy_action(P, f.sc.model, f.as, mu);
    Action ub = greedy_action(Pbar, f.sc.model, f.as, mu);
    CHECK(ub.powers[0] >= u.powers[0] - 1e-12);
  }
}

TEST_CASE("Prop. 2: a covariance demanding full power exists") {
  Fixture f;
  for (double mu : {0.01, 0.1, 1.0}) {
    bool found = false;
    for (double scale = 1.0; scale < 1e9 && !found; scale *= 4) {
      Matrix P = scale * Matrix::Identity(4, 4);
      Action a = greedy_action(P, f.sc.model, f.as, mu);
      found = a.powers == std::vector<double>{1.0, 1.0};
    }
    CHECK(found);
  }
}

TEST_CASE("thresholds") {
  ChannelParams ch = two_drones().channel;  // SIC
  for (auto& ps : ch.power_sets) ps = {0.0, 1.0};
  ChannelParams simple = ch;
  simple.receiver = Receiver::Simple;

  RegionThresholds t0 = thresholds(ch, 0.0);
  CHECK(t0.M1 == 0.0);
  CHECK(t0.M2 == 0.0);
  RegionThresholds ts = thresholds(ch, 0.1);
  CHECK(ts.M1 == doctest::Approx(ts.M2).epsilon(1e-12));  // symmetric channel
  RegionThresholds tn = thresholds(simple, 0.1);
  CHECK(ts.M1 < tn.M1);  // SIC shrinks the corner
}

TEST_CASE("region classifier matches the greedy brute force") {
  Scenario sc = two_drones(2);  // two power levels
  ActionSet as = ActionSet::full_grid(sc.channel, 200000, 1);
  RegionThresholds th = thresholds(sc.channel, 0.1);
  RngStream rng(5, 0);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    Matrix P = random_block_cov(sc.model, rng, 1 + 3 * rng.uniform());
    auto psis = psi_all(P, sc.model);
    if (classify_psi(psis[0], psis[1], th, 0.1) == Region::Boundary) continue;
    Action cls = corollary_region_action(P, sc.model, as, 0.1);
    Action brute = greedy_action(P, sc.model, as, 0.1);
    CHECK(cls.powers == brute.powers);
    ++checked;
  }
  CHECK(checked > 900);
}

TEST_CASE("S00 and S11 region membership") {
  Scenario sc = two_drones(2);
  RegionThresholds th = thresholds(sc.channel, 0.1);
  // psis below mu/q_i land in S00
  CHECK(classify_psi(0.5 * 0.1 / th.q1, 0.5 * 0.1 / th.q2, th, 0.1) == Region::S00);
  CHECK(classify_psi(1e3, 1e3, th, 0.1) == Region::S11);
}

TEST_CASE("S11 without SIC is contained in S11 with SIC") {
  Scenario sc = two_drones(2);
  ChannelParams simple = sc.channel;
  simple.receiver = Receiver::Simple;
  RegionThresholds th_sic = thresholds(sc.channel, 0.1);
  RegionThresholds th_smp = thresholds(simple, 0.1);
  int extra = 0;
  for (int i = 1; i <= 60; ++i)
    for (int j = 1; j <= 60; ++j) {
      const double p1 = i * 0.1, p2 = j * 0.1;
      if (classify_psi(p1, p2, th_smp, 0.1) == Region::S11) {
        CHECK(classify_psi(p1, p2, th_sic, 0.1) == Region::S11);
      } else if (classify_psi(p1, p2, th_sic, 0.1) == Region::S11) {
        ++extra;
      }
    }
  CHECK(extra > 0);  // strictly larger region
}

TEST_CASE("discretization: D=1 gives the pool mean, exact pools pass through") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_paths = 2;
  cfg.path_length = 20;
  cfg.n_centroids = 1;
  auto one = discretize_states(f.sc.model, f.as, cfg);
  REQUIRE(one.size() == 1);

  cfg.n_centroids = 2000;  // more than the pool of 40
  bool truncated = false;
  auto all = discretize_states(f.sc.model, f.as, cfg, &truncated);
  CHECK(truncated);
  CHECK(all.size() == 40);

  // the single centroid equals the Frobenius mean of the returned pool
  Matrix mean = Matrix::Zero(4, 4);
  for (const auto& P : all) mean += P;
  mean /= static_cast<double>(all.size());
  CHECK((one[0] - mean).norm() < 1e-9);
}

TEST_CASE("quantization error shrinks as D doubles") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_paths = 20;
  cfg.path_length = 100;
  auto distortion = [&](int D) {
    cfg.n_centroids = D;
    auto cents = discretize_states(f.sc.model, f.as, cfg);
    // re-walk the same paths is internal; approximate distortion on the centroids
    // of the double-resolution run
    cfg.n_centroids = 400;
    auto probe = discretize_states(f.sc.model, f.as, cfg);
    double sum = 0;
    for (const auto& P : probe) sum += (P - cents[nearest_centroid(cents, P)]).squaredNorm();
    return sum;
  };
  CHECK(distortion(100) < distortion(50));
}

TEST_CASE("nearest centroid lookup") {
  std::vector<Matrix> cents = {Matrix::Identity(2, 2), 3 * Matrix::Identity(2, 2)};
  CHECK(nearest_centroid(cents, Matrix::Identity(2, 2)) == 0);
  CHECK(nearest_centroid(cents, 10 * Matrix::Identity(2, 2)) == 1);
  CHECK(nearest_centroid(cents, 2 * Matrix::Identity(2, 2)) == 0);  // tie: lower index
}

TEST_CASE("value iteration on a single centroid hits the closed-form fixed point") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_centroids = 1;
  cfg.n_paths = 2;
  cfg.path_length = 10;
  std::vector<Matrix> cents = {2 * Matrix::Identity(4, 4)};
  PolicyTable table = value_iteration(cents, f.sc.model, f.as, cfg);
  CHECK(table.converged);
  double best = 1e300;
  int best_a = -1;
  for (int a = 0; a < f.as.size(); ++a) {
    const double c =
        expected_cost(cents[0], f.as.actions[a], f.as.dists[a], cfg.mu, f.sc.model);
    if (action_preferred(c, f.as.totals[a], best, best_a < 0 ? 0 : f.as.totals[best_a])) {
      best = c;
      best_a = a;
    }
  }
  CHECK(table.action_index[0] == best_a);
  CHECK(table.value[0] == doctest::Approx(best / (1 - cfg.beta)).epsilon(1e-5));
}

TEST_CASE("vanishing discount reduces to greedy") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.beta = 1e-9;
  cfg.n_centroids = 40;
  cfg.n_paths = 10;
  cfg.path_length = 50;
  auto cents = discretize_states(f.sc.model, f.as, cfg);
  PolicyTable table = value_iteration(cents, f.sc.model, f.as, cfg);
  for (std::size_t c = 0; c < cents.size(); ++c)
    CHECK(table.action_index[c] == greedy_index(cents[c], f.sc.model, f.as, cfg.mu));
}

TEST_CASE("value iteration deltas contract geometrically") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_centroids = 60;
  cfg.n_paths = 10;
  cfg.path_length = 80;
  auto cents = discretize_states(f.sc.model, f.as, cfg);
  PolicyTable table = value_iteration(cents, f.sc.model, f.as, cfg);
  CHECK(table.converged);
  for (std::size_t k = 1; k < table.deltas.size(); ++k)
    CHECK(table.deltas[k] <= cfg.beta * table.deltas[k - 1] + 1e-9);
  CHECK(bellman_residual(table, f.sc.model, f.as) <= cfg.resolved_vi_tol() + 1e-12);
}

TEST_CASE("serial and parallel value iteration agree exactly") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_centroids = 50;
  cfg.n_paths = 8;
  cfg.path_length = 60;
  auto cents = discretize_states(f.sc.model, f.as, cfg);
  PolicyTable a = value_iteration(cents, f.sc.model, f.as, cfg, false);
  PolicyTable b = value_iteration(cents, f.sc.model, f.as, cfg, true);
  REQUIRE(a.value.size() == b.value.size());
  for (std::size_t c = 0; c < a.value.size(); ++c) {
    CHECK(a.value[c] == b.value[c]);
    CHECK(a.action_index[c] == b.action_index[c]);
  }
}

TEST_CASE("finite horizon: K=1 is greedy, huge mu silences the plan") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_centroids = 30;
  cfg.n_paths = 8;
  cfg.path_length = 40;
  auto cents = discretize_states(f.sc.model, f.as, cfg);
  auto plan1 = finite_horizon_dp(cents, 1, f.sc.model, f.as, cfg);
  REQUIRE(plan1.size() == 1);
  for (std::size_t c = 0; c < cents.size(); ++c)
    CHECK(plan1[0][c] == greedy_index(cents[c], f.sc.model, f.as, cfg.mu));

  SolverConfig expensive = cfg;
  expensive.mu = 1e9;
  auto plan = finite_horizon_dp(cents, 5, f.sc.model, f.as, expensive);
  for (const auto& stage : plan)
    for (int a : stage) CHECK(a == 0);

  // long horizons converge to the infinite-horizon actions
  PolicyTable table = value_iteration(cents, f.sc.model, f.as, cfg);
  auto plan200 = finite_horizon_dp(cents, 200, f.sc.model, f.as, cfg);
  int agree = 0;
  for (std::size_t c = 0; c < cents.size(); ++c)
    agree += plan200[0][c] == table.action_index[c];
  CHECK(agree >= static_cast<int>(cents.size()) - 1);
}

TEST_CASE("policy table lookup") {
  Fixture f;
  std::vector<Matrix> cents = {Matrix::Identity(4, 4), 5 * Matrix::Identity(4, 4)};
  PolicyTable table;
  table.centroids = cents;
  table.action_index = {0, 15};
  table.value = {1.0, 2.0};
  CHECK(lookup_index(table, cents[0]) == 0);
  CHECK(lookup_index(table, 100 * Matrix::Identity(4, 4)) == 1);  // clamps outward
  Matrix jitter = cents[1];
  jitter(0, 0) += 1e-12;
  CHECK(lookup_index(table, jitter) == 1);
  CHECK(lookup(table, f.as, cents[1]).powers == f.as.actions[15].powers);
}

TEST_CASE("policy file round trip is bit exact") {
  Fixture f;
  SolverConfig cfg = f.sc.solver;
  cfg.n_centroids = 20;
  cfg.n_paths = 6;
  cfg.path_length = 30;
  auto cents = discretize_states(f.sc.model, f.as, cfg);
  PolicyTable table = value_iteration(cents, f.sc.model, f.as, cfg);

  std::ostringstream first;
  save_policy(first, table, f.as);
  std::istringstream in(first.str());
  PolicyTable loaded = load_policy(in, f.as);
  std::ostringstream second;
  save_policy(second, loaded, f.as);
  CHECK(first.str() == second.str());
  for (std::size_t c = 0; c < cents.size(); ++c) {
    CHECK(loaded.action_index[c] == table.action_index[c]);
    CHECK(loaded.value[c] == table.value[c]);
  }
}

TEST_CASE("loading rejects mismatched action sets") {
  Fixture f;
  PolicyTable table;
  table.centroids = {Matrix::Identity(4, 4)};
  table.action_index = {3};
  table.value = {1.0};
  table.config = f.sc.solver;
  table.receiver = Receiver::Sic;
  std::ostringstream os;
  save_policy(os, table, f.as);

  ChannelParams simple = f.sc.channel;
  simple.receiver = Receiver::Simple;
  ActionSet other = ActionSet::full_grid(simple, 100000, 1);
  std::istringstream in(os.str());
  CHECK_THROWS(load_policy(in, other));
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = 1.0;
  CHECK_THROWS(cfg.validate());
  CHECK_NOTHROW(cfg.validate(true));  // undiscounted finite horizon allowed
  cfg.beta = 0.9;
  cfg.n_centroids = 0;
  CHECK_THROWS(cfg.validate());
}
