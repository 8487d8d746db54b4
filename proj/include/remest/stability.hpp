#pragma once

#include <vector>

#include "remest/estimator.hpp"

namespace remest {

/// Lambda(A) = 1 - 1 / prod |unstable eigenvalues|^2; 0 for stable A.
double lambda_capital(const Matrix& A);

/// PBH tests (singular-value rank decisions at 1e-8 * ||A||).
bool detectable(const Matrix& A, const Matrix& C);
bool reachable(const Matrix& A, const Matrix& B);

/// Probability that every sensor in J succeeds when all of J transmit at max
/// power and everyone else is silent. Exact where a closed form exists,
/// Monte Carlo otherwise.
double perfect_mp_probability(const std::vector<int>& J, const ChannelParams& ch,
                              std::size_t mc_samples = 1000000, std::uint64_t seed = 1);

/// min over i in J of the lone-transmitter success probability at max power.
double worst_channel_probability(const std::vector<int>& J, const ChannelParams& ch);

struct StabilityReport {
  std::vector<int> J;
  bool detectable = false;
  bool reachable = false;
  double p_mp = 0, p_wc = 0;
  double lambda_A = 0, lambda_A_pow = 0;  // Lambda(A), Lambda(A^|J|)
  bool cond1 = false;                     // p_mp > Lambda(A), with detectability/reachability
  bool cond2 = false;                     // p_wc > Lambda(A^|J|), likewise
  bool riccati_bounded = false;
  std::vector<double> trace_trajectory;   // Tr of the modified Riccati iterates
};

/// Modified Riccati iteration X <- A X A' + Q - p A X C'(C X C' + R)^-1 C X A'
/// from X = A P0 A' + Q. Returns (bounded, trace trajectory): bounded when the
/// trace settles (relative change < tol over a trailing window), false once it
/// crosses the 1e12 divergence guard.
std::pair<bool, std::vector<double>> modified_riccati_boundedness(
    const Matrix& A, const Matrix& Q, const Matrix& C, const Matrix& R, double p,
    int horizon = 2000, double tol = 1e-9, const Matrix& P0 = Matrix());

/// Stacked C and block-diagonal R over the subset J.
std::pair<Matrix, Matrix> stack_outputs(const SystemModel& m, const std::vector<int>& J);

/// Evaluates both sufficient stability conditions for the subset J, including
/// the numerical boundedness check run at p_mp.
StabilityReport check_lemma(const std::vector<int>& J, const SystemModel& m,
                            const ChannelParams& ch, int horizon = 2000,
                            std::size_t mc_samples = 1000000, std::uint64_t seed = 1);

/// Enumerates every nonempty detectable subset (N <= 8) and returns the report
/// of the one maximizing p_mp.
StabilityReport search_best_subset(const SystemModel& m, const ChannelParams& ch,
                                   std::size_t mc_samples = 200000, std::uint64_t seed = 1);

}  // namespace remest
