#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace attnbound {

/// Identifier written into every report so runs can be matched to the
/// generator that produced them.
inline constexpr std::string_view kRngAlgorithm = "splitmix64-substream-v1";

/// SplitMix64 (Steele, Lea, Flood 2014). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Independent stream `index` of the family rooted at `seed`. Streams depend
/// only on (seed, index), never on scheduling.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) noexcept {
  return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(index + 0x632BE59BD9B4E019ULL)));
}

/// Seed of substream `index`, for APIs that take a plain seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return SplitMix64::mix(seed ^ SplitMix64::mix(index + 0x632BE59BD9B4E019ULL));
}

// The distributions below are spelled out instead of using <random>'s, whose
// algorithms are implementation-defined.

/// Uniform on [0, 1) with 53 random bits.
double uniform01(SplitMix64& rng) noexcept;
/// Uniform integer in [0, n); n > 0. Lemire's nearly-divisionless method.
std::uint64_t uniform_index(SplitMix64& rng, std::uint64_t n) noexcept;
/// Standard normal via the Marsaglia polar method (one value per call).
double standard_normal(SplitMix64& rng) noexcept;

}  // namespace attnbound
