#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace polymeasure {

// Deterministic counter-based generator: SplitMix64 run in counter mode.
// Output i of a stream with key k is mix64(k + (i+1) * golden), where mix64
// is the SplitMix64 finalizer. Streams are derived by hashing a tag into the
// key, so independent substreams can be split off without sharing state.
// All randomness in this project flows through this class; results are
// bit-reproducible for a fixed seed on any platform with IEEE-754 doubles.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Child stream keyed by (this stream, tag); does not advance this stream.
  CounterRng split(std::uint64_t tag) const {
    return CounterRng(mix64(key_ ^ mix64(tag + kGolden)));
  }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform strictly inside (0, 1).
  double next_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  bool bernoulli(double p) { return next_unit() < p; }

  // Box-Muller; draws two uniforms per call, no cached spare.
  double gaussian() {
    const double u1 = next_open01();
    const double u2 = next_open01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Knuth's product method; fine for the small rates used here.
  int poisson(double rate) {
    const double limit = std::exp(-rate);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_open01();
    } while (p > limit);
    return k - 1;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace polymeasure
