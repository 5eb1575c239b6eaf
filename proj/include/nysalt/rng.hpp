#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every random number in an ensemble run is a pure function of
// (seed, stream, purpose, step, slot), so trajectories can be generated
// in any order, on any number of threads, with bit-identical results.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace nysalt {

namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         std::array<std::uint32_t, 2>& key) {
  constexpr std::uint64_t mul_a = 0xD2511F53ull;
  constexpr std::uint64_t mul_b = 0xCD9E8D57ull;
  const std::uint64_t prod_a = mul_a * ctr[0];
  const std::uint64_t prod_b = mul_b * ctr[2];
  const std::uint32_t hi_a = static_cast<std::uint32_t>(prod_a >> 32);
  const std::uint32_t lo_a = static_cast<std::uint32_t>(prod_a);
  const std::uint32_t hi_b = static_cast<std::uint32_t>(prod_b >> 32);
  const std::uint32_t lo_b = static_cast<std::uint32_t>(prod_b);
  ctr = {hi_b ^ ctr[1] ^ key[0], lo_b, hi_a ^ ctr[3] ^ key[1], lo_a};
  key[0] += 0x9E3779B9u;  // golden ratio
  key[1] += 0xBB67AE85u;  // sqrt(3)-1
}

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) philox_round(ctr, key);
  return ctr;
}

inline double u64_to_open01(std::uint64_t x) {
  // strictly inside (0,1) so log() below is always finite
  return (static_cast<double>(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace detail

// Identifies what a stream of randomness is used for; keeps independent
// purposes on disjoint counters even for the same (seed, trajectory).
enum class RngPurpose : std::uint32_t {
  initial_condition = 1,
  path_noise = 2,
  resampling = 3,
  monte_carlo = 4,
  subset_selection = 5,
};

// Stateless generator: draws are indexed, never sequenced.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, RngPurpose purpose)
      : seed_(seed), stream_(stream), purpose_(static_cast<std::uint32_t>(purpose)) {}

  // Two iid N(0,1) values for a given (step, slot) address.
  std::array<double, 2> normal_pair(std::uint64_t step, std::uint32_t slot) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
        slot, purpose_};
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed_ ^ (stream_ * 0x9E3779B97F4A7C15ull)),
        static_cast<std::uint32_t>((seed_ >> 32) ^ (stream_ >> 32) ^ (stream_ << 16))};
    const auto r = detail::philox4x32(ctr, key);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    const double u1 = detail::u64_to_open01(a);
    const double u2 = detail::u64_to_open01(b);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return {radius * std::cos(two_pi * u2), radius * std::sin(two_pi * u2)};
  }

  double normal(std::uint64_t step, std::uint32_t slot) const {
    return normal_pair(step, slot >> 1)[slot & 1u];
  }

  // Fills out[0..n) with N(0,1) draws addressed by (step, ...).
  void fill_normal(std::uint64_t step, std::vector<double>& out) const {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; i += 2) {
      const auto pair = normal_pair(step, static_cast<std::uint32_t>(i / 2));
      out[i] = pair[0];
      if (i + 1 < n) out[i + 1] = pair[1];
    }
  }

  // Uniform in [0,1), one value per (step, slot).
  double uniform(std::uint64_t step, std::uint32_t slot) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
        slot, purpose_ | 0x80000000u};
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed_ ^ (stream_ * 0x9E3779B97F4A7C15ull)),
        static_cast<std::uint32_t>((seed_ >> 32) ^ (stream_ >> 32) ^ (stream_ << 16))};
    const auto r = detail::philox4x32(ctr, key);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    return static_cast<double>(a >> 11) * (1.0 / 9007199254740992.0);
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t step, std::uint64_t n) const {
    return static_cast<std::uint64_t>(uniform(step, 0) * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint32_t purpose_;
};

}  // namespace nysalt
