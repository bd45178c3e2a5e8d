#include "hopm/rng.hpp"

namespace hopm {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(mix64(base) ^ (index * 0xd1b54a32d192ed03ULL));
}

Engine make_stream(std::uint64_t seed, NoiseStream stream) {
  const auto s = static_cast<std::uint64_t>(stream);
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(a ^ mix64(s));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(s)};
  return Engine(seq);
}

}  // namespace hopm
