#pragma once

#include <cstdint>
#include <vector>

namespace capstext::numcore {

// Deterministic seeded random source built on SplitMix64 (Steele, Lea &
// Flood 2014). The raw 64-bit stream is bit-exact across platforms.
// Independent streams are derived by hashing (seed, stream), which gives
// the splittable mode used for reproducible shuffles.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double next_uniform();

  // Unbiased integer in [0, n) via rejection sampling. n must be >= 1.
  std::uint64_t next_below(std::uint64_t n);

  // Box-Muller normal draw; the second value of each pair is cached.
  double next_normal(double mean = 0.0, double stddev = 1.0);

  // Derive an independent stream from the same seed.
  RandomSource split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Seeded Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, RandomSource& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
    std::swap(items[i], items[j]);
  }
}

}  // namespace capstext::numcore
