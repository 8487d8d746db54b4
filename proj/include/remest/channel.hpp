#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "remest/rng.hpp"

namespace remest {

enum class Receiver { Simple, Sic };

/// Rayleigh-fading multi-access uplink: per-sensor slow-fading gain, finite
/// transmit power set, AWGN power and SINR reception threshold.
struct ChannelParams {
  std::vector<double> gain;                     // slow-fading power gain s_i
  std::vector<std::vector<double>> power_sets;  // ascending, first entry 0
  double sigma2 = 0.0;                          // noise power
  double alpha = 0.75;                          // reception threshold
  Receiver receiver = Receiver::Simple;

  int n_sensors() const { return static_cast<int>(power_sets.size()); }
  double max_power(int i) const { return power_sets[i].back(); }

  /// Throws std::invalid_argument on a malformed configuration.
  void validate() const;
};

/// One transmit power per sensor, each drawn from that sensor's power set.
struct Action {
  std::vector<double> powers;

  Action() = default;
  explicit Action(std::vector<double> p) : powers(std::move(p)) {}

  /// Validating constructor: every entry must belong to the per-sensor set.
  static Action checked(std::vector<double> p, const ChannelParams& ch);

  int n() const { return static_cast<int>(powers.size()); }
  double total() const;
};

/// Arrival outcome bitmask: bit i set <=> packet from sensor i decoded.
using Outcome = unsigned;

struct ArrivalDistribution {
  int n_sensors = 0;
  std::vector<double> probs;  // size 1 << n_sensors, indexed by Outcome

  static ArrivalDistribution point_mass(int n, Outcome g);

  double operator[](Outcome g) const { return probs[g]; }
  double& operator[](Outcome g) { return probs[g]; }
  std::size_t size() const { return probs.size(); }

  /// P(gamma_i = 1): sum over outcomes with bit i set.
  double marginal_success(int i) const;

  /// Throws if probabilities fall outside [0,1] or do not sum to 1.
  void check_normalized(double tol = 1e-12) const;
};

/// Received powers s_i * r_i * P_i with r_i ~ Exp(1) i.i.d.; exactly zero for
/// silent sensors.
std::vector<double> sample_received_powers(const Action& a, const ChannelParams& ch,
                                           RngStream& rng);

/// SINR-threshold decoding under the configured receiver. SIC decodes in
/// descending received-power order (ties: lower index first) and stops at the
/// first failure, since every weaker packet then sees at least as much
/// interference.
Outcome decode(const std::vector<double>& prx, const ChannelParams& ch);

/// True when an exact expression is available for this action: at most one
/// positive power (any N), or N == 2 with alpha in (0,1).
bool closed_form_applicable(const Action& a, const ChannelParams& ch);

/// Exact two-sensor arrival distribution. Requires N == 2; when both powers
/// are positive additionally requires alpha in (0,1). Throws otherwise.
ArrivalDistribution arrival_distribution_closed_form2(const Action& a, const ChannelParams& ch);

/// Monte Carlo estimate: empirical frequencies of decode() over n_samples
/// draws. Deterministic given seed, independent of thread count.
ArrivalDistribution arrival_distribution_mc(const Action& a, const ChannelParams& ch,
                                            std::size_t n_samples, std::uint64_t seed,
                                            bool parallel = true);

/// Closed form when applicable, Monte Carlo otherwise.
ArrivalDistribution arrival_distribution(const Action& a, const ChannelParams& ch,
                                         std::size_t mc_samples = 1000000,
                                         std::uint64_t seed = 1);

}  // namespace remest
