#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>
#include <vector>

namespace daaim {

// Deterministic splitmix64 generator. Independent streams are derived by
// hashing a purpose label (or index) together with the root seed, so every
// consumer draws from its own state and parallel order cannot change results.
class Rng {
public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(mix(seed)) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform integer in [0, n); n == 0 yields 0
  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller, spare discarded so stream position stays predictable
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // child stream keyed on the root seed, not on current position
  Rng split(std::string_view label) const {
    uint64_t h = 0xCBF29CE484222325ULL ^ seed_;
    for (char c : label) {
      h ^= static_cast<uint8_t>(c);
      h *= 0x100000001B3ULL;
    }
    return Rng(mix(h));
  }

  Rng split(std::string_view label, uint64_t index) const {
    Rng base = split(label);
    return Rng(mix(base.seed_ + 0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t seed() const { return seed_; }

private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
    z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
    return z ^ (z >> 33);
  }

  uint64_t seed_;
  uint64_t state_;
};

}  // namespace daaim
