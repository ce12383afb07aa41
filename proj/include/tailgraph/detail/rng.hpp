#pragma once

#include <cstdint>
#include <random>

namespace tailgraph::detail {

// splitmix64; used to derive independent streams from one user seed so
// that per-point / per-replicate work is reproducible regardless of order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  return splitmix64(s);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(derive_seed(seed, stream));
}

inline double uniform01(std::mt19937_64& eng) {
  // 53-bit mantissa uniform in (0,1)
  return ((eng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double normal(std::mt19937_64& eng) {
  // Box-Muller, one value per call (the spare is discarded to keep
  // per-point seeding order-independent)
  double u1 = uniform01(eng);
  double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace tailgraph::detail
