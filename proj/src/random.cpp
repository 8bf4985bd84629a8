#include "capstext/random.hpp"

#include <cmath>

#include "capstext/error.hpp"

namespace capstext::numcore {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream) : seed_(seed) {
  state_ = mix64(seed + kGolden) ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ull);
}

std::uint64_t RandomSource::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RandomSource::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomSource::next_below(std::uint64_t n) {
  if (n == 0) throw InputError("random: next_below(0)");
  const std::uint64_t limit = ~0ull - ~0ull % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double RandomSource::next_normal(double mean, double stddev) {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return mean + stddev * cached_normal_;
  }
  double u1;
  do {
    u1 = next_uniform();
  } while (u1 <= 0.0);
  const double u2 = next_uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = kTwoPi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return mean + stddev * radius * std::cos(angle);
}

RandomSource RandomSource::split(std::uint64_t stream) const {
  return RandomSource(seed_, stream);
}

}  // namespace capstext::numcore
