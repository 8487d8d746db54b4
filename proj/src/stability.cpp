#include "remest/stability.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace remest {

double lambda_capital(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, false);
  double prod = 1.0;
  for (int i = 0; i < A.rows(); ++i) {
    const double mag2 = std::norm(es.eigenvalues()[i]);
    if (mag2 > 1.0) prod *= mag2;
  }
  return 1.0 - 1.0 / prod;
}

namespace {

int rank_of(const Matrix& M, double tol) {
  Eigen::JacobiSVD<Matrix> svd(M);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++r;
  return r;
}

Matrix complex_stack_real(const std::complex<double>& lambda, const Matrix& A,
                          const Matrix& C) {
  // [A - lambda I; C] as a real matrix of doubled column blocks:
  // rank over C equals rank of [Re -Im; Im Re] embedding
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(C.rows());
  Matrix M = Matrix::Zero(2 * (n + m), 2 * n);
  Matrix Re = A - lambda.real() * Matrix::Identity(n, n);
  M.block(0, 0, n, n) = Re;
  M.block(0, n, n, n) = lambda.imag() * Matrix::Identity(n, n);
  M.block(n, 0, n, n) = -lambda.imag() * Matrix::Identity(n, n);
  M.block(n, n, n, n) = Re;
  M.block(2 * n, 0, m, n) = C;
  M.block(2 * n + m, n, m, n) = C;
  return M;
}

}  // namespace

bool detectable(const Matrix& A, const Matrix& C) {
  const int n = static_cast<int>(A.rows());
  const double tol = 1e-8 * std::max(1.0, A.norm());
  Eigen::EigenSolver<Matrix> es(A, false);
  for (int i = 0; i < n; ++i) {
    const auto lambda = es.eigenvalues()[i];
    if (std::abs(lambda) < 1.0 - 1e-9) continue;  // stable modes need not be observable
    if (rank_of(complex_stack_real(lambda, A, C), tol) < 2 * n) return false;
  }
  return true;
}

bool reachable(const Matrix& A, const Matrix& B) {
  const int n = static_cast<int>(A.rows());
  const double tol = 1e-8 * std::max(1.0, A.norm());
  Eigen::EigenSolver<Matrix> es(A, false);
  for (int i = 0; i < n; ++i) {
    const auto lambda = es.eigenvalues()[i];
    // PBH on [A - lambda I, B] via the transposed stacked form
    Matrix Ct = B.transpose();
    if (rank_of(complex_stack_real(std::conj(lambda), A.transpose(), Ct), tol) < 2 * n)
      return false;
  }
  return true;
}

double perfect_mp_probability(const std::vector<int>& J, const ChannelParams& ch,
                              std::size_t mc_samples, std::uint64_t seed) {
  if (J.empty()) throw std::invalid_argument("p_mp: nonempty subset required");
  std::vector<double> powers(ch.n_sensors(), 0.0);
  for (int i : J) powers[i] = ch.max_power(i);
  const auto dist = arrival_distribution(Action(powers), ch, mc_samples, seed);
  Outcome want = 0;
  for (int i : J) want |= 1u << i;
  double p = 0.0;
  for (Outcome g = 0; g < dist.size(); ++g)
    if ((g & want) == want) p += dist[g];
  return p;
}

double worst_channel_probability(const std::vector<int>& J, const ChannelParams& ch) {
  if (J.empty()) throw std::invalid_argument("p_wc: nonempty subset required");
  double p = 1.0;
  for (int i : J) {
    const double lambda = 1.0 / (ch.gain[i] * ch.max_power(i));
    p = std::min(p, std::exp(-ch.alpha * lambda * ch.sigma2));
  }
  return p;
}

std::pair<Matrix, Matrix> stack_outputs(const SystemModel& m, const std::vector<int>& J) {
  int rows = 0;
  for (int i : J) rows += static_cast<int>(m.sensors[i].C.rows());
  Matrix C(rows, m.n());
  Matrix R = Matrix::Zero(rows, rows);
  int r = 0;
  for (int i : J) {
    const int mi = static_cast<int>(m.sensors[i].C.rows());
    C.middleRows(r, mi) = m.sensors[i].C;
    R.block(r, r, mi, mi) = m.sensors[i].R;
    r += mi;
  }
  return {C, R};
}

std::pair<bool, std::vector<double>> modified_riccati_boundedness(
    const Matrix& A, const Matrix& Q, const Matrix& C, const Matrix& R, double p,
    int horizon, double tol, const Matrix& P0) {
  if (horizon < 1) throw std::invalid_argument("riccati: horizon must be >= 1");
  const int n = static_cast<int>(A.rows());
  Matrix X = P0.size() > 0 ? P0 : Matrix::Identity(n, n);
  X = symmetrize(A * X * A.transpose() + Q);  // P(1|0)
  std::vector<double> traces;
  traces.reserve(horizon);
  const int window = 10;
  for (int k = 0; k < horizon; ++k) {
    traces.push_back(X.trace());
    if (traces.back() > 1e12) return {false, traces};
    const Matrix CX = C * X;
    const Matrix S = CX * C.transpose() + R;
    const Matrix gain = S.ldlt().solve(CX * A.transpose());
    X = symmetrize(A * X * A.transpose() + Q -
                   p * (A * X * C.transpose()) * gain);
    if (k >= window) {
      bool settled = true;
      for (int w = 0; w < window; ++w) {
        const double a = traces[traces.size() - 1 - w];
        const double b = traces[traces.size() - 2 - w];
        if (std::abs(a - b) > tol * std::max(1.0, std::abs(b))) {
          settled = false;
          break;
        }
      }
      if (settled) return {true, traces};
    }
  }
  return {false, traces};
}

StabilityReport check_lemma(const std::vector<int>& J, const SystemModel& m,
                            const ChannelParams& ch, int horizon,
                            std::size_t mc_samples, std::uint64_t seed) {
  if (J.empty()) throw std::invalid_argument("check_lemma: nonempty subset required");
  StabilityReport rep;
  rep.J = J;
  const auto [CJ, RJ] = stack_outputs(m, J);
  rep.detectable = detectable(m.A, CJ);
  Eigen::SelfAdjointEigenSolver<Matrix> qe(m.Q);
  const Matrix Qhalf =
      qe.eigenvectors() *
      qe.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      qe.eigenvectors().transpose();
  rep.reachable = reachable(m.A, Qhalf);
  rep.p_mp = perfect_mp_probability(J, ch, mc_samples, seed);
  rep.p_wc = worst_channel_probability(J, ch);
  rep.lambda_A = lambda_capital(m.A);
  Matrix Apow = Matrix::Identity(m.n(), m.n());
  for (std::size_t k = 0; k < J.size(); ++k) Apow = Apow * m.A;
  rep.lambda_A_pow = lambda_capital(Apow);
  rep.cond1 = rep.detectable && rep.reachable && rep.p_mp > rep.lambda_A;
  rep.cond2 = rep.detectable && rep.reachable && rep.p_wc > rep.lambda_A_pow;
  auto [bounded, traj] = modified_riccati_boundedness(m.A, m.Q, CJ, RJ, rep.p_mp, horizon);
  rep.riccati_bounded = bounded;
  rep.trace_trajectory = std::move(traj);
  return rep;
}

StabilityReport search_best_subset(const SystemModel& m, const ChannelParams& ch,
                                   std::size_t mc_samples, std::uint64_t seed) {
  const int N = m.n_sensors();
  if (N > 8) throw std::invalid_argument("subset search supports at most 8 sensors");
  StabilityReport best;
  bool have = false;
  for (unsigned mask = 1; mask < (1u << N); ++mask) {
    std::vector<int> J;
    for (int i = 0; i < N; ++i)
      if (mask & (1u << i)) J.push_back(i);
    StabilityReport rep = check_lemma(J, m, ch, 2000, mc_samples, seed);
    if (!rep.detectable) continue;
    if (!have || rep.p_mp > best.p_mp) {
      best = std::move(rep);
      have = true;
    }
  }
  if (!have) throw std::runtime_error("no detectable sensor subset found");
  return best;
}

}  // namespace remest
