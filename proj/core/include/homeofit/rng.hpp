#pragma once

#include <cstdint>

namespace homeofit {

/// Counter-based splittable generator. Every draw is a pure function of
/// (key, counter), so independent streams are obtained by `split` without
/// sharing state and results never depend on evaluation order elsewhere.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept : key_(mix(seed ^ kSeedSalt)) {}

  /// Child stream keyed by (this key, tag). Does not advance this stream.
  CounterRng split(std::uint64_t tag) const noexcept;

  std::uint64_t next_u64() noexcept { return mix(key_ + kGolden * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one value per two draws, no caching).
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  CounterRng(std::uint64_t key, int) noexcept : key_(key) {}

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x5DEECE66DULL;

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace homeofit
