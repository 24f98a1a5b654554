#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "sfcrl/errors.hpp"

namespace sfcrl {

// Seeded random stream. The generator is std::mt19937_64, whose output
// sequence is fixed by the standard; the conversions below are written out
// so that draws are identical across standard library implementations.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32),
                      0x5fc3a1u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1].
  double uniform_open_closed() { return 1.0 - uniform01(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [lo, hi], unbiased (rejection sampling).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw DomainError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream stateless.
    const double u1 = uniform_open_closed();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for (parent, a, b); distinct inputs give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(parent) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

// Exponential draw with the given rate: -ln(u)/rate, u ~ U(0, 1].
inline double sample_exponential(double rate, RngStream& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw DomainError("sample_exponential: rate must be positive");
  }
  double u = rng.uniform_open_closed();
  // u == 1 would give exactly 0; the open interval excludes it.
  while (u >= 1.0) u = rng.uniform_open_closed();
  return -std::log(u) / rate;
}

}  // namespace sfcrl
