#pragma once

#include <Eigen/Dense>
#include <vector>

#include "remest/channel.hpp"

namespace remest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Sensor {
  Matrix C;  // m_i x n
  Matrix R;  // m_i x m_i, positive definite
};

/// Linear system x+ = A x + w, w ~ N(0, Q), observed by N sensors
/// y_i = C_i x + v_i, v_i ~ N(0, R_i). When `blocks` is set the model asserts
/// the block-diagonal decoupled structure (A, Q block-diagonal, sensor i
/// reading only block i).
struct SystemModel {
  Matrix A;
  Matrix Q;
  std::vector<Sensor> sensors;
  std::vector<int> blocks;

  int n() const { return static_cast<int>(A.rows()); }
  int n_sensors() const { return static_cast<int>(sensors.size()); }
  bool decoupled() const { return !blocks.empty(); }
  int block_offset(int i) const;

  /// i-th diagonal block of an n x n matrix (decoupled models).
  Matrix block(const Matrix& P, int i) const;

  /// C_{i0}: sensor i's output matrix restricted to its own block.
  Matrix output_block(int i) const;

  void validate() const;
};

Matrix symmetrize(const Matrix& M);

/// Inverse of a symmetric positive definite matrix via LDLT, with a
/// trace-scaled diagonal jitter when the matrix is near singular. Throws
/// std::runtime_error when the factorization fails outright.
Matrix spd_inverse(const Matrix& P);

/// Information-form measurement update: (P^-1 + sum_i gamma_i C_i' R_i^-1 C_i)^-1.
Matrix measurement_update(const Matrix& P, Outcome gamma, const SystemModel& m);

/// Prediction: A P A' + Q.
Matrix time_update(const Matrix& P, const SystemModel& m);

/// One-step covariance map g(P, gamma) = time_update(measurement_update(P, gamma)).
Matrix g_operator(const Matrix& P, Outcome gamma, const SystemModel& m);

/// Expected one-step cost: sum_gamma dist(gamma) Tr(g(P, gamma)) + mu * sum_i u_i.
double expected_cost(const Matrix& P, const Action& u, const ArrivalDistribution& dist,
                     double mu, const SystemModel& m);

/// Trace reduction earned when sensor i's packet arrives:
/// Tr[A_i P_i C' (C P_i C' + R_i)^-1 C P_i A_i'] on the sensor's block.
double psi(const Matrix& P_block, int i, const SystemModel& m);

/// psi of every block of a full decoupled covariance.
std::vector<double> psi_all(const Matrix& P, const SystemModel& m);

struct EstimatorState {
  Vector xhat;  // x̂(k|k-1)
  Matrix cov;   // P(k|k-1)
};

/// Advances estimate and covariance one step given the arrival outcome and the
/// measurements of the received sensors (y[i] is read only when bit i of gamma
/// is set). The gain inverts only the received block of C P C' + R.
EstimatorState state_update(const EstimatorState& s, Outcome gamma,
                            const std::vector<Vector>& y, const SystemModel& m);

}  // namespace remest
