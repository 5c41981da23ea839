#pragma once

// Deterministic, stateless-derivable randomness.
//
// Every random draw in the library comes from an RngStream derived from a
// (seed, tag...) tuple, so any part of a run can be reproduced in isolation
// without replaying global RNG state. No std::*_distribution is used anywhere
// (their outputs are implementation-defined); sampling is hand-rolled so runs
// are bit-identical across platforms.

#include <cstdint>
#include <cstring>
#include <string_view>

#include "skillworld/errors.hpp"

namespace skillworld {

// Multiply-xor chain in the FNV-1a shape. The basis is a project constant,
// not the published FNV offset; both values are a compatibility contract —
// every stored world and run manifest depends on the streams they produce.
inline constexpr std::uint64_t kHashBasis = 1469598103934665603ull;
inline constexpr std::uint64_t kHashPrime = 1099511628211ull;

inline std::uint64_t hash64(std::string_view s, std::uint64_t h = kHashBasis) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kHashPrime;
  }
  return h;
}

inline std::uint64_t hash64_u64(std::uint64_t v, std::uint64_t h = kHashBasis) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffull;
    h *= kHashPrime;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Accumulates heterogeneous tags (strings, integers) into one 64-bit hash.
class TagHash {
 public:
  TagHash& add(std::string_view s) {
    h_ = hash64(s, h_);
    return *this;
  }
  TagHash& add(std::uint64_t v) {
    h_ = hash64_u64(v, h_);
    return *this;
  }
  TagHash& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
  TagHash& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = kHashBasis;
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t state) : state_(state) {}

  template <class... Tags>
  static RngStream derive(std::uint64_t seed, Tags&&... tags) {
    TagHash h;
    h.add(seed);
    (h.add(tags), ...);
    std::uint64_t s = h.value();
    // one warm-up scramble so nearby tag hashes decorrelate
    splitmix64(s);
    return RngStream(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform double in [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // unbiased integer in [0, n) (Lemire's method)
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw InvalidDistribution("uniform_int: n must be positive");
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    std::uint64_t lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  int uniform_index(int n) { return static_cast<int>(uniform_int(static_cast<std::uint64_t>(n))); }

 private:
  std::uint64_t state_;
};

}  // namespace skillworld
