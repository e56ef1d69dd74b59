#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace lclab::rng {

// SplitMix64 step, used to expand seeds into full generator states.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with per-stream seeding.
//
// Every sampling routine derives one generator per logical unit of work
// (sample row, MCMC chain, bootstrap replicate) from (seed, stream), so
// results are independent of how work is split across threads.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) : Xoshiro256(seed, 0) {}

  Xoshiro256(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 0x632BE59BD9B4E019ULL));
    bool all_zero = true;
    for (auto& word : state_) {
      word = splitmix64(z);
      all_zero = all_zero && word == 0;
    }
    if (all_zero) state_[0] = 1;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); never returns an endpoint, so
  // log() and inverse-CDF transforms stay finite.
  double uniform01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform on [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller (cosine branch only; no cached state,
  // so draws consumed per call are fixed).
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Exp(1) variate.
  double exponential() { return -std::log(uniform01()); }

  // Symmetric (Laplace-type) exponential with unit variance:
  // density (1/sqrt(2)) exp(-sqrt(2)|x|).
  double symmetric_exponential() {
    const double magnitude = exponential() / std::sqrt(2.0);
    return (next() & 1ULL) ? magnitude : -magnitude;
  }

  // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform01(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform01();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
};

}  // namespace lclab::rng
