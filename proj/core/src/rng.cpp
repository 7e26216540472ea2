#include "adamct/rng.hpp"

#include <cmath>

namespace adamct {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t RngState::next_u64() {
  ++counter_;
  return splitmix64(seed_ + counter_ * kGolden);
}

double RngState::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngState::uniform_below(std::uint64_t n) {
  if (n == 0) {
    return 0;
  }
  // Mask-and-reject: uniform over the next power of two, retry past n.
  std::uint64_t mask = n - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  std::uint64_t draw = next_u64() & mask;
  while (draw >= n) {
    draw = next_u64() & mask;
  }
  return draw;
}

std::int64_t RngState::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform_below(span));
}

double RngState::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + spare_ * stddev;
  }
  const double angle = uniform01() * 2.0 * 3.14159265358979323846;
  const double radius = std::sqrt(-2.0 * std::log(1.0 - uniform01()));
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return mean + radius * std::cos(angle) * stddev;
}

double RngState::truncated_normal(double stddev, double clip_sds) {
  double z = normal();
  while (std::abs(z) > clip_sds) {
    z = normal();
  }
  return z * stddev;
}

RngState RngState::child(std::uint64_t tag) const {
  return RngState(splitmix64(seed_ ^ splitmix64(tag + kGolden)));
}

}  // namespace adamct
