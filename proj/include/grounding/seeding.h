#ifndef GROUNDING_SEEDING_H_
#define GROUNDING_SEEDING_H_

#include <cstdint>

namespace grounding {

// SplitMix64 finaliser applied to (seed, stream): independent-looking seeds
// for sub-generators derived from one user seed.
inline std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace grounding

#endif  // GROUNDING_SEEDING_H_
