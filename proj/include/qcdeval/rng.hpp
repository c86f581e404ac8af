#pragma once

#include <cstdint>
#include <random>

namespace qcdeval {

/// SplitMix64 finalizer. Used only to decorrelate (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Engine for stream `index` under `seed`. Every replication / sequence gets
/// its own engine, so results do not depend on iteration order or threads.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t index,
                                     std::uint64_t salt = 0) {
  return std::mt19937_64(mix64(mix64(seed ^ mix64(salt)) + index));
}

}  // namespace qcdeval
