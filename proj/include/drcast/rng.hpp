#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drcast {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed split: every (user, method, purpose) tuple hashes the
// master seed into an independent stream, so per-user work can be fanned out
// over threads without affecting the result.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view scope,
                                 std::uint64_t counter = 0) {
  std::uint64_t h = master ^ 0x51b9d9259a2c8f6bULL;
  for (const char c : scope) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    (void)splitmix64(h);
    h = splitmix64(h);
  }
  h ^= counter;
  return splitmix64(h);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

// Uniform in [0, 1) from the top 53 bits; avoids distribution objects where a
// portable, easily reproduced stream matters.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace drcast
