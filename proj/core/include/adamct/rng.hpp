#pragma once

#include <cstdint>

namespace adamct {

// Counter-based SplitMix64 stream. The state is (seed, counter), so the same
// seed yields the same draw sequence on every platform, and copying the value
// forks the stream at its current position. All distribution mappings below
// are implemented here rather than with <random> distributions, whose output
// is implementation-defined.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01();

  // Uniform in [0, n), unbiased via rejection. n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via Box-Muller, with the usual cached spare.
  double normal(double mean = 0.0, double stddev = 1.0);

  // Normal(0, stddev^2) resampled until |z| <= clip_sds standard deviations.
  double truncated_normal(double stddev, double clip_sds);

  // Derives an independent stream. Children of the same parent with distinct
  // tags are decorrelated; the derivation is pure in (seed, tag).
  RngState child(std::uint64_t tag) const;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace adamct
