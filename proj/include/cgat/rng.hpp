#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace cgat {

std::uint64_t splitmix64(std::uint64_t x);

// Seed for a named sub-stream of a root seed ("split", "walks", "init", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Deterministic generator. Bounded draws are implemented here rather than
// through <random> distributions so sequences do not depend on the standard
// library vendor.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Uniform on [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cgat
