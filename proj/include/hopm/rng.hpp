#pragma once

#include <cstdint>
#include <random>

namespace hopm {

/// Independent noise sources of one run. Each gets its own substream so that
/// paired runs (e.g. two antisqueezing levels) share every other realization.
enum class NoiseStream : std::uint64_t {
  kStokesS2 = 1,
  kStokesS3 = 2,
  kSpin = 3,
  kSynthetic = 4,
};

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used to derive well-separated seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for job `index` of a run seeded with `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Engine for (seed, stream). Distinct streams are statistically independent
/// and the mapping does not depend on the order in which streams are created.
Engine make_stream(std::uint64_t seed, NoiseStream stream);

}  // namespace hopm
