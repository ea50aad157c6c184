#pragma once

#include <cmath>
#include <cstdint>

namespace wd {

// SplitMix64 finalizer. Distinct inputs map to well-distributed 64-bit
// words with no sequential state, so draws are reproducible and
// order-independent under parallelism.
inline uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-based random stream: value i of the stream is a pure function
// of (seed, stream id, i).
class RngStream {
 public:
  explicit RngStream(uint64_t seed, uint64_t stream = 0)
      : key_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^
                   (0xd1b54a32d192ed03ULL * (stream + 1)))) {}

  RngStream substream(uint64_t id) const {
    RngStream s(0);
    s.key_ = mix64(key_ ^ (0x8cb92ba72f3d8dd7ULL * (id + 1)));
    return s;
  }

  uint64_t bits(uint64_t ctr) const {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ctr);
  }

  // Uniform on the open interval (0,1).
  double uniform(uint64_t ctr) const {
    return (double)((bits(ctr) >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal, one value per counter (Box-Muller, cosine branch).
  double normal(uint64_t ctr) const {
    double u1 = uniform(2 * ctr);
    double u2 = uniform(2 * ctr + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  uint64_t key_;
};

}  // namespace wd
