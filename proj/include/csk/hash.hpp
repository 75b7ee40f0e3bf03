#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace csk {

// 64-bit FNV-1a. Used for content digests, bag-of-words bucketing and
// completion-cache keys; the constants are part of the file formats, so
// they must not change.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ull;
  }
  return state;
}

// splitmix64: the PRNG behind every seeded shuffle in the toolkit. Chosen
// over platform RNGs so that identical seeds give identical partitions and
// prompt samples on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Draw in [0, bound). Plain modulo; part of the documented shuffle
  // definition, so it must not change.
  std::uint64_t below(std::uint64_t bound) { return bound ? next() % bound : 0; }

  double unit() {  // [0, 1)
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

 private:
  std::uint64_t state_;
};

// Seeded Fisher-Yates.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace csk
