#pragma once

#include <cstdint>
#include <random>

namespace lidar_forge {

/// Seeded generator with platform-independent derived distributions.
/// std::mt19937_64's raw stream is fully specified by the standard, the
/// <random> distributions are not, so all variates are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer on [lo, hi], unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Number of 64-bit words consumed so far.
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-frame seed, independent of processing order.
constexpr std::uint64_t frame_seed(std::uint64_t base, std::uint64_t sequence,
                                   std::uint64_t frame) noexcept {
  return mix64(mix64(mix64(base) ^ sequence) ^ frame);
}

}  // namespace lidar_forge
