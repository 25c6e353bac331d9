#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace alsim {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a path of tags
/// (round index, scene id, stage constant, ...). Streams never share state,
/// so results do not depend on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(master);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stage tags for derive_seed.
namespace stream {
inline constexpr std::uint64_t kGenerate = 0x47454e;
inline constexpr std::uint64_t kSplit = 0x53504c;
inline constexpr std::uint64_t kTrainCandidates = 0x54524e;
inline constexpr std::uint64_t kTrainShuffle = 0x534846;
inline constexpr std::uint64_t kValidation = 0x56414c;
inline constexpr std::uint64_t kPoolInference = 0x494e46;
inline constexpr std::uint64_t kRandomSelect = 0x524e44;
}  // namespace stream

}  // namespace alsim
