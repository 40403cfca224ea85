#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace piht {

// Deterministic replacement for std::uniform_real_distribution /
// std::normal_distribution, whose output is implementation-defined.
// Every draw consumes a fixed number of raw engine words, so a (seed,
// position) pair pins the stream exactly on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  Rng(std::uint64_t seed, std::uint64_t position) : Rng(seed) {
    engine_.discard(position);
    position_ = position;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t next_raw() {
    ++position_;
    return engine_();
  }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double next_uniform() {
    return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound); rejection sampling, no modulo bias.
  std::uint64_t next_bounded(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t raw = next_raw();
    while (raw >= limit) raw = next_raw();
    return raw % bound;
  }

  /// Standard normal via Box-Muller; two uniforms per call, nothing cached.
  double next_gaussian() {
    double u1 = next_uniform();
    while (u1 == 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace piht
