#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "lindistill/core.hpp"

namespace lindistill {

// Deterministic random stream. Every consumer receives an explicit Rng;
// nothing in the library touches global generator state. Distributions are
// implemented here (not via <random> distribution objects) so a given seed
// produces the same draws on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to pass through log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Unbiased integer in [0, bound) via rejection.
  std::uint64_t integer(std::uint64_t bound);

  // Standard normal, Box-Muller with a cached spare.
  double normal();

  void fill_gaussian(Eigen::Ref<Vector> out) {
    for (Index i = 0; i < out.size(); ++i) out[i] = normal();
  }

  Vector gaussian(Index d) {
    Vector v(d);
    fill_gaussian(v);
    return v;
  }

  // Random point on the unit sphere in R^d.
  Vector unit_sphere(Index d);

  // +1 or -1 with equal probability.
  double sign() { return (next_u64() & 1u) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Seed for the stream identified by (master seed, purpose label, index).
// Streams for distinct labels or indices are statistically independent, so
// trials can run in any order, or concurrently, with identical results.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index);

inline Rng derive_stream(std::uint64_t master, std::string_view label,
                         std::uint64_t index) {
  return Rng(derive_seed(master, label, index));
}

}  // namespace lindistill
