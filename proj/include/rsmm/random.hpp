#pragma once

#include <cstdint>
#include <random>

namespace rsmm {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic child seed for stream `index` under `seed`. Streams with
/// different indices are statistically independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Stream used to draw the subspace plan of a model fitted with `seed`.
inline Rng plan_rng(std::uint64_t seed) { return Rng(derive_seed(seed, 0)); }

/// Stream used for noise and EM of subspace `i` of a model fitted with `seed`.
inline Rng subspace_rng(std::uint64_t seed, std::size_t i) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(i) + 1));
}

}  // namespace rsmm
