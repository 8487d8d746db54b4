#include "remest/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace remest {

void ChannelParams::validate() const {
  const int n = n_sensors();
  if (n < 1) throw std::invalid_argument("channel: at least one sensor required");
  if (static_cast<int>(gain.size()) != n)
    throw std::invalid_argument("channel: gain size mismatch");
  for (double s : gain)
    if (!(s > 0)) throw std::invalid_argument("channel: gains must be positive");
  if (!(sigma2 >= 0)) throw std::invalid_argument("channel: sigma2 must be >= 0");
  if (!(alpha > 0)) throw std::invalid_argument("channel: alpha must be > 0");
  for (const auto& ps : power_sets) {
    if (ps.size() < 2 || ps.front() != 0.0)
      throw std::invalid_argument("channel: power set must contain 0 and a positive level");
    for (std::size_t k = 1; k < ps.size(); ++k)
      if (!(ps[k] > ps[k - 1]))
        throw std::invalid_argument("channel: power set must be strictly ascending");
  }
}

Action Action::checked(std::vector<double> p, const ChannelParams& ch) {
  if (static_cast<int>(p.size()) != ch.n_sensors())
    throw std::invalid_argument("action: wrong length");
  for (int i = 0; i < ch.n_sensors(); ++i) {
    const auto& ps = ch.power_sets[i];
    if (std::find(ps.begin(), ps.end(), p[i]) == ps.end())
      throw std::invalid_argument("action: power not in sensor's power set");
  }
  return Action(std::move(p));
}

double Action::total() const {
  return std::accumulate(powers.begin(), powers.end(), 0.0);
}

ArrivalDistribution ArrivalDistribution::point_mass(int n, Outcome g) {
  ArrivalDistribution d;
  d.n_sensors = n;
  d.probs.assign(std::size_t{1} << n, 0.0);
  d.probs[g] = 1.0;
  return d;
}

double ArrivalDistribution::marginal_success(int i) const {
  double p = 0.0;
  for (std::size_t g = 0; g < probs.size(); ++g)
    if (g & (1u << i)) p += probs[g];
  return p;
}

void ArrivalDistribution::check_normalized(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (p < -tol || p > 1.0 + tol)
      throw std::runtime_error("arrival distribution: probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::runtime_error("arrival distribution: probabilities do not sum to 1");
}

std::vector<double> sample_received_powers(const Action& a, const ChannelParams& ch,
                                           RngStream& rng) {
  const int n = ch.n_sensors();
  std::vector<double> prx(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (a.powers[i] > 0.0) prx[i] = ch.gain[i] * rng.exponential() * a.powers[i];
  return prx;
}

namespace {

inline bool threshold_ok(double power, double interference, double alpha) {
  // interference == 0 happens with sigma2 == 0; a lone positive signal passes.
  if (interference <= 0.0) return power > 0.0;
  return power / interference > alpha;
}

Outcome decode_simple(const std::vector<double>& prx, const ChannelParams& ch) {
  const double total = std::accumulate(prx.begin(), prx.end(), 0.0);
  Outcome g = 0;
  for (std::size_t i = 0; i < prx.size(); ++i)
    if (threshold_ok(prx[i], total - prx[i] + ch.sigma2, ch.alpha)) g |= 1u << i;
  return g;
}

Outcome decode_sic(const std::vector<double>& prx, const ChannelParams& ch) {
  const int n = static_cast<int>(prx.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return prx[i] > prx[j]; });
  double residual = std::accumulate(prx.begin(), prx.end(), 0.0);
  Outcome g = 0;
  for (int i : order) {
    if (!threshold_ok(prx[i], residual - prx[i] + ch.sigma2, ch.alpha)) break;
    g |= 1u << i;
    residual -= prx[i];
  }
  return g;
}

int count_positive(const Action& a) {
  int k = 0;
  for (double p : a.powers)
    if (p > 0.0) ++k;
  return k;
}

// Exact distribution when at most one sensor transmits (any N).
ArrivalDistribution distribution_at_most_one(const Action& a, const ChannelParams& ch) {
  const int n = ch.n_sensors();
  int tx = -1;
  for (int i = 0; i < n; ++i)
    if (a.powers[i] > 0.0) tx = i;
  if (tx < 0) return ArrivalDistribution::point_mass(n, 0);
  const double lambda = 1.0 / (ch.gain[tx] * a.powers[tx]);
  const double p = std::exp(-ch.alpha * lambda * ch.sigma2);
  ArrivalDistribution d = ArrivalDistribution::point_mass(n, 0);
  d.probs[0] = 1.0 - p;
  d.probs[1u << tx] = p;
  return d;
}

}  // namespace

Outcome decode(const std::vector<double>& prx, const ChannelParams& ch) {
  return ch.receiver == Receiver::Simple ? decode_simple(prx, ch) : decode_sic(prx, ch);
}

bool closed_form_applicable(const Action& a, const ChannelParams& ch) {
  if (count_positive(a) <= 1) return true;
  return ch.n_sensors() == 2 && ch.alpha > 0.0 && ch.alpha < 1.0;
}

ArrivalDistribution arrival_distribution_closed_form2(const Action& a, const ChannelParams& ch) {
  if (ch.n_sensors() != 2)
    throw std::invalid_argument("closed form requires exactly 2 sensors");
  if (count_positive(a) <= 1) return distribution_at_most_one(a, ch);
  if (!(ch.alpha > 0.0 && ch.alpha < 1.0))
    throw std::invalid_argument("closed form with two transmitters requires alpha in (0,1)");

  const double l1 = 1.0 / (ch.gain[0] * a.powers[0]);
  const double l2 = 1.0 / (ch.gain[1] * a.powers[1]);
  const double al = ch.alpha;
  const double s2 = ch.sigma2;
  const double f1 = l1 / (l1 + al * l2);  // P(prx1 beats alpha*prx2), noiseless
  const double f2 = l2 / (l2 + al * l1);
  const double e1 = std::exp(-al * l1 * s2);
  const double e2 = std::exp(-al * l2 * s2);
  const double eb = std::exp(-(l1 + l2) * al / (1.0 - al) * s2);

  ArrivalDistribution d;
  d.n_sensors = 2;
  d.probs.assign(4, 0.0);
  if (ch.receiver == Receiver::Simple) {
    const double p11 = (f1 + f2 - 1.0) * eb;
    const double p10 = f2 * e1 - p11;
    const double p01 = f1 * e2 - p11;
    d.probs[0b11] = p11;
    d.probs[0b01] = p10;  // sensor 1 only (bit 0)
    d.probs[0b10] = p01;  // sensor 2 only (bit 1)
    d.probs[0b00] = 1.0 - p11 - p10 - p01;
  } else {
    // The no-arrival set is identical with and without SIC, so p00 carries
    // over; p11 follows from normalization against the single-success terms.
    const double p00 = 1.0 - f2 * e1 - f1 * e2 + (f1 + f2 - 1.0) * eb;
    const double p10 = f2 * e1 * (1.0 - std::exp(-al * s2 * (l2 + al * l1)));
    const double p01 = f1 * e2 * (1.0 - std::exp(-al * s2 * (l1 + al * l2)));
    d.probs[0b11] = 1.0 - p10 - p01 - p00;
    d.probs[0b01] = p10;
    d.probs[0b10] = p01;
    d.probs[0b00] = p00;
  }
  d.check_normalized(1e-12);
  return d;
}

ArrivalDistribution arrival_distribution_mc(const Action& a, const ChannelParams& ch,
                                            std::size_t n_samples, std::uint64_t seed,
                                            bool parallel) {
  if (n_samples < 1) throw std::invalid_argument("mc: n_samples must be >= 1");
  const int n = ch.n_sensors();
  const std::size_t n_out = std::size_t{1} << n;

  // Fixed chunk layout keeps the estimate independent of the thread count.
  const int n_chunks = 64;
  std::vector<std::vector<std::size_t>> counts(n_chunks, std::vector<std::size_t>(n_out, 0));

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int c = 0; c < n_chunks; ++c) {
    RngStream rng(seed, static_cast<std::uint64_t>(c));
    const std::size_t lo = n_samples * c / n_chunks;
    const std::size_t hi = n_samples * (c + 1) / n_chunks;
    auto& local = counts[c];
    for (std::size_t k = lo; k < hi; ++k) {
      const auto prx = sample_received_powers(a, ch, rng);
      ++local[decode(prx, ch)];
    }
  }

  ArrivalDistribution d;
  d.n_sensors = n;
  d.probs.assign(n_out, 0.0);
  for (int c = 0; c < n_chunks; ++c)
    for (std::size_t g = 0; g < n_out; ++g) d.probs[g] += static_cast<double>(counts[c][g]);
  for (auto& p : d.probs) p /= static_cast<double>(n_samples);
  return d;
}

ArrivalDistribution arrival_distribution(const Action& a, const ChannelParams& ch,
                                         std::size_t mc_samples, std::uint64_t seed) {
  if (count_positive(a) <= 1) return distribution_at_most_one(a, ch);
  if (ch.n_sensors() == 2 && ch.alpha < 1.0)
    return arrival_distribution_closed_form2(a, ch);
  return arrival_distribution_mc(a, ch, mc_samples, seed);
}

}  // namespace remest
