#pragma once

// Seeding contract for reproducible Monte-Carlo runs.
//
// Every random quantity is drawn from a stream identified by
// (master seed, frame index, purpose tag, lane). The four words are split into
// 32-bit halves and fed to std::seed_seq, which seeds std::mt19937_64. Both the
// seed_seq mixing and the mt19937_64 recurrence are fully specified by the C++
// standard, and the conversions below (uniform doubles, bounded integers,
// Gaussians) are implemented here instead of through the implementation-defined
// std::*_distribution classes. A given (seed, frame, purpose, lane) therefore
// yields the same numbers on every conforming toolchain.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace mud {

enum class StreamPurpose : std::uint64_t {
  InfoBits = 1,
  Spreading = 2,
  Noise = 3,
  Interleaver = 4,
  Test = 99,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng(std::uint64_t master, std::uint64_t frame, StreamPurpose purpose, std::uint64_t lane = 0) {
    const std::array<std::uint64_t, 4> words{master, frame, static_cast<std::uint64_t>(purpose), lane};
    std::array<std::uint32_t, 8> halves{};
    for (std::size_t i = 0; i < words.size(); ++i) {
      halves[2 * i] = static_cast<std::uint32_t>(words[i] & 0xffffffffu);
      halves[2 * i + 1] = static_cast<std::uint32_t>(words[i] >> 32);
    }
    std::seed_seq seq(halves.begin(), halves.end());
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bit() { return (next() >> 63) != 0; }

  /// Uniform integer in [0, bound) by rejection; bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % bound);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mud
