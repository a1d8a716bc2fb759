#pragma once

#include <cmath>
#include <cstdint>

namespace qsd {

namespace detail {
// splitmix64 finalizer (Steele, Lea & Flood's SplittableRandom mixing).
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based splitmix64 stream: output i is mix64(key + i*gamma), with
/// the key derived by hashing (seed, stream_id, replicate).  A stream is a
/// pure function of those three values and the draw index, independent of
/// thread scheduling, so parallel runs are bit-reproducible by construction.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id, uint64_t replicate) {
    uint64_t k = detail::mix64(seed + 0x9E3779B97F4A7C15ULL);
    k = detail::mix64(k ^ (stream_id + 0xD1B54A32D192ED03ULL));
    state_ = detail::mix64(k ^ (replicate + 0x8CB92BA72F3D8DD7ULL));
  }

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(state_);
  }

  /// Uniform on (0, 1]: never zero, so -log(u) is always finite.
  double next_u01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Inverse-CDF exponential with the given rate.
  double next_exponential(double rate) { return -std::log(next_u01()) / rate; }

 private:
  uint64_t state_;
};

}  // namespace qsd
