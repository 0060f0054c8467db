#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace udn {

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a, used to turn experiment names into stream tags.
constexpr std::uint64_t hash_tag(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based generator: the i-th output is mix64(key + i * gamma), so a
/// stream is fully described by (key, counter) and streams derived from
/// distinct keys never share state.
///
/// Distribution helpers are implemented here rather than through
/// <random> distributions so that outputs are identical across standard
/// library implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return mix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL);
  }

  /// Independent child stream; the parent is not advanced.
  [[nodiscard]] CounterRng split(std::uint64_t tag) const noexcept {
    return CounterRng(key_ ^ mix64(tag ^ 0xD1B54A32D192ED03ULL));
  }
  [[nodiscard]] CounterRng split(std::string_view tag) const noexcept {
    return split(hash_tag(tag));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % bound;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli_half() noexcept { return ((*this)() >> 63) != 0; }

  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed of trial `trial` of experiment `experiment` under `base_seed`.
/// For fixed (base_seed, experiment) the map trial -> seed is injective.
constexpr std::uint64_t seed_for(std::uint64_t base_seed, std::uint64_t experiment,
                                 std::uint64_t trial) noexcept {
  return mix64(mix64(base_seed ^ mix64(experiment)) ^ trial);
}

constexpr std::uint64_t seed_for(std::uint64_t base_seed, std::string_view experiment,
                                 std::uint64_t trial) noexcept {
  return seed_for(base_seed, hash_tag(experiment), trial);
}

}  // namespace udn
