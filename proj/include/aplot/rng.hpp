#ifndef APLOT_RNG_HPP_
#define APLOT_RNG_HPP_

#include <cstdint>

namespace aplot {

// One splitmix64 step over (seed, stream). Gives every subsystem its own
// reproducible stream from a single user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace stream {
inline constexpr std::uint64_t kHeadInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kSplit = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kSynthetic = 5;
inline constexpr std::uint64_t kCandidates = 6;
}  // namespace stream

}  // namespace aplot

#endif  // APLOT_RNG_HPP_
