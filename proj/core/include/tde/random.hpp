#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace tde {

// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t z) noexcept;

// FNV-1a over the bytes of `label`.
std::uint64_t fnv1a64(std::string_view label) noexcept;

/// Counter-based generator keyed by (seed, label).
///
/// Draw i of a stream is `mix64(key + (i + 1) * 0x9E3779B97F4A7C15)`, with
/// `key = mix64(seed ^ mix64(fnv1a64(label)))`. Streams for different modules
/// are obtained with split(label), so adding draws to one module never shifts
/// another module's values. The algorithm is fixed so golden traces can be
/// regenerated from any language.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::string_view label) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;
  // 53-bit uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Box-Muller; consumes two draws per call.
  double normal() noexcept;
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  Rng split(std::string_view label) const noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tde
