#pragma once

#include <cstdint>
#include <initializer_list>

#include "dfr/normal.hpp"

namespace dfr {

namespace detail {
// splitmix64 output function (Steele, Lea, Flood 2014).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

/// Deterministic counter-based generator (splitmix64). Every consumer of
/// randomness derives its own stream from the top-level seed and a path of
/// integer labels, so results are independent of evaluation order and thread
/// count: stream(seed, {a, b, ...}) has state mix(... mix(mix(seed) ^ gamma*a) ...).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = detail::mix64(seed + 0x9E3779B97F4A7C15ull);
    for (std::uint64_t id : path)
      s = detail::mix64(s ^ (0x9E3779B97F4A7C15ull * (id + 0xD1B54A32D192ED03ull)));
    return RngStream(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return detail::mix64(state_);
  }

  // Uniform on the open interval (0,1); never returns an exact 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by inverse transform; keeps streams reproducible across
  // standard libraries (std::normal_distribution is implementation-defined).
  double normal() { return norm_quantile(uniform()); }

 private:
  std::uint64_t state_;
};

// Stream labels; first path element after the seed.
enum StreamLabel : std::uint64_t {
  kStreamGibbs = 1,       // (kStreamGibbs, iteration, subject)
  kStreamScores = 2,      // accept-reject draws, (kStreamScores, iteration, subject)
  kStreamInit = 3,
  kStreamReplicate = 4,   // (kStreamReplicate, replicate) -> per-replicate seed
  kStreamSimX = 5,
  kStreamSimScores = 6,
  kStreamSimTimes = 7,
  kStreamSimNoise = 8,
  kStreamPredict = 9,
};

}  // namespace dfr
