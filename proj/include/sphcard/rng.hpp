#pragma once

// Counter-based splittable random streams.
//
// Every draw is out = mix64(key + GAMMA * ++counter), so a stream is a pure
// function of (key, counter) and never carries hidden state beyond the
// counter.  Substreams derive fresh keys by mixing path components into the
// parent key, which gives reproducible, statistically independent streams
// for parallel replicates keyed by (seed, replicate, ...) regardless of
// scheduling order.

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace sphcard {

namespace detail {
// SplitMix64 finalizer: bijective avalanche mix on 64 bits.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;
}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed)
      : key_(detail::mix64(seed + detail::kGoldenGamma)) {}

  // Derives an independent stream; the path extends the parent key, so
  // substream({a}) of substream({b}) differs from substream({b, a}) only
  // by mixing order, and both are decorrelated from the parent.
  RngStream substream(std::initializer_list<std::uint64_t> path) const {
    RngStream s(*this);
    s.ctr_ = 0;
    s.cached_ = false;
    for (std::uint64_t p : path) {
      s.key_ = detail::mix64(s.key_ + detail::kGoldenGamma * (p + 0x632BE59BD9B4E019ull));
    }
    return s;
  }
  RngStream substream(std::uint64_t a) const { return substream({a}); }
  RngStream substream(std::uint64_t a, std::uint64_t b) const { return substream({a, b}); }

  std::uint64_t next_u64() { return detail::mix64(key_ + detail::kGoldenGamma * ++ctr_); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1): never returns an exact endpoint, safe under log.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  // Standard normal via Box-Muller; caches the second deviate.
  double normal() {
    if (cached_) {
      cached_ = false;
      return cache_;
    }
    double u1 = uniform_open();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  bool cached_ = false;
  double cache_ = 0.0;
};

}  // namespace sphcard
