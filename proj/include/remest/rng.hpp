#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace remest {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded random stream. Distinct (seed, stream) pairs give statistically
/// independent sequences, so workers can each own a stream and results stay
/// reproducible regardless of thread count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (stream + 1));
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    eng_.seed(seq);
  }

  /// Uniform on [0, 1).
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  /// Exp(1) draw.
  double exponential() { return -std::log1p(-uniform()); }

  double gaussian() { return normal_(eng_); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace remest
