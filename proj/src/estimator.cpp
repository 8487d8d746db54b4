#include "remest/estimator.hpp"

#include <numeric>
#include <stdexcept>

namespace remest {

int SystemModel::block_offset(int i) const {
  int off = 0;
  for (int k = 0; k < i; ++k) off += blocks[k];
  return off;
}

Matrix SystemModel::block(const Matrix& P, int i) const {
  const int off = block_offset(i);
  return P.block(off, off, blocks[i], blocks[i]);
}

Matrix SystemModel::output_block(int i) const {
  const int off = block_offset(i);
  return sensors[i].C.middleCols(off, blocks[i]);
}

void SystemModel::validate() const {
  const int dim = n();
  if (A.rows() != A.cols()) throw std::invalid_argument("model: A must be square");
  if (Q.rows() != dim || Q.cols() != dim) throw std::invalid_argument("model: Q size mismatch");
  if ((Q - Q.transpose()).norm() > 1e-10 * (1.0 + Q.norm()))
    throw std::invalid_argument("model: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> qe(Q);
  if (qe.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("model: Q must be positive semidefinite");
  for (const auto& s : sensors) {
    if (s.C.cols() != dim) throw std::invalid_argument("model: C_i column count mismatch");
    if (s.R.rows() != s.C.rows() || s.R.cols() != s.C.rows())
      throw std::invalid_argument("model: R_i size mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> re(s.R);
    if (re.eigenvalues().minCoeff() <= 0)
      throw std::invalid_argument("model: R_i must be positive definite");
  }
  if (!blocks.empty()) {
    if (static_cast<int>(blocks.size()) != n_sensors())
      throw std::invalid_argument("model: one block per sensor required");
    if (std::accumulate(blocks.begin(), blocks.end(), 0) != dim)
      throw std::invalid_argument("model: block sizes must sum to n");
    // off-diagonal blocks of A, Q must vanish; C_i must read only block i
    for (int i = 0; i < n_sensors(); ++i) {
      const int off = block_offset(i);
      for (int j = 0; j < n_sensors(); ++j) {
        if (i == j) continue;
        const int offj = block_offset(j);
        if (A.block(off, offj, blocks[i], blocks[j]).cwiseAbs().maxCoeff() > 0 ||
            Q.block(off, offj, blocks[i], blocks[j]).cwiseAbs().maxCoeff() > 0)
          throw std::invalid_argument("model: A, Q not block-diagonal as declared");
        if (sensors[i].C.middleCols(offj, blocks[j]).cwiseAbs().maxCoeff() > 0)
          throw std::invalid_argument("model: C_i reads outside its block");
      }
    }
  }
}

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

Matrix spd_inverse(const Matrix& P) {
  const int n = static_cast<int>(P.rows());
  Matrix S = symmetrize(P);
  Eigen::LDLT<Matrix> ldlt(S);
  bool bad = ldlt.info() != Eigen::Success || !ldlt.isPositive();
  if (!bad) {
    const auto d = ldlt.vectorD();
    bad = !(d.minCoeff() > 0) || d.maxCoeff() / d.minCoeff() > 1e12;
  }
  if (bad) {
    S += (1e-12 * std::abs(S.trace()) / n) * Matrix::Identity(n, n);
    ldlt.compute(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw std::runtime_error("spd_inverse: matrix is not positive definite");
  }
  return symmetrize(ldlt.solve(Matrix::Identity(n, n)));
}

Matrix measurement_update(const Matrix& P, Outcome gamma, const SystemModel& m) {
  if (gamma == 0) return P;
  Matrix info = spd_inverse(P);
  for (int i = 0; i < m.n_sensors(); ++i) {
    if (!(gamma & (1u << i))) continue;
    const auto& s = m.sensors[i];
    info += s.C.transpose() * spd_inverse(s.R) * s.C;
  }
  return spd_inverse(info);
}

Matrix time_update(const Matrix& P, const SystemModel& m) {
  return symmetrize(m.A * P * m.A.transpose() + m.Q);
}

Matrix g_operator(const Matrix& P, Outcome gamma, const SystemModel& m) {
  return time_update(measurement_update(P, gamma, m), m);
}

double expected_cost(const Matrix& P, const Action& u, const ArrivalDistribution& dist,
                     double mu, const SystemModel& m) {
  double cost = 0.0;
  for (Outcome g = 0; g < dist.size(); ++g)
    if (dist[g] > 0.0) cost += dist[g] * g_operator(P, g, m).trace();
  return cost + mu * u.total();
}

double psi(const Matrix& P_block, int i, const SystemModel& m) {
  if (!m.decoupled()) throw std::invalid_argument("psi: decoupled model required");
  const Matrix Ai = m.block(m.A, i);
  const Matrix Ci = m.output_block(i);
  const Matrix& Ri = m.sensors[i].R;
  const Matrix S = Ci * P_block * Ci.transpose() + Ri;
  const Matrix G = Ci * P_block * Ai.transpose();
  return (G.transpose() * S.ldlt().solve(G)).trace();
}

std::vector<double> psi_all(const Matrix& P, const SystemModel& m) {
  std::vector<double> out(m.n_sensors());
  for (int i = 0; i < m.n_sensors(); ++i) out[i] = psi(m.block(P, i), i, m);
  return out;
}

EstimatorState state_update(const EstimatorState& s, Outcome gamma,
                            const std::vector<Vector>& y, const SystemModel& m) {
  EstimatorState out;
  out.cov = g_operator(s.cov, gamma, m);
  if (gamma == 0) {
    out.xhat = m.A * s.xhat;
    return out;
  }
  int rows = 0;
  for (int i = 0; i < m.n_sensors(); ++i)
    if (gamma & (1u << i)) rows += static_cast<int>(m.sensors[i].C.rows());
  Matrix Crec(rows, m.n());
  Matrix Rrec = Matrix::Zero(rows, rows);
  Vector yrec(rows);
  int r = 0;
  for (int i = 0; i < m.n_sensors(); ++i) {
    if (!(gamma & (1u << i))) continue;
    const int mi = static_cast<int>(m.sensors[i].C.rows());
    Crec.middleRows(r, mi) = m.sensors[i].C;
    Rrec.block(r, r, mi, mi) = m.sensors[i].R;
    if (static_cast<int>(y.size()) <= i || y[i].size() != mi)
      throw std::invalid_argument("state_update: missing measurement for received sensor");
    yrec.segment(r, mi) = y[i];
    r += mi;
  }
  const Matrix S = Crec * s.cov * Crec.transpose() + Rrec;
  const Matrix K = s.cov * Crec.transpose() * spd_inverse(S);
  // innovation taken as y - C x̂ (standard Kalman form)
  out.xhat = m.A * (s.xhat + K * (yrec - Crec * s.xhat));
  return out;
}

}  // namespace remest
