#include "lindistill/rng.hpp"

#include <cmath>

namespace lindistill {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::integer(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::integer: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * kPi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Vector Rng::unit_sphere(Index d) {
  if (d < 1) throw std::invalid_argument("Rng::unit_sphere: dimension must be positive");
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector v = gaussian(d);
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
  throw numeric_error("Rng::unit_sphere: gaussian draws degenerate");
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index) {
  std::uint64_t state = master ^ 0x2545f4914f6cdd1dull;
  splitmix64(state);
  state ^= fnv1a64(label);
  splitmix64(state);
  state ^= index * 0xd1342543de82ef95ull + 0x6a09e667f3bcc909ull;
  std::uint64_t seed = splitmix64(state);
  seed ^= splitmix64(state);
  return seed;
}

}  // namespace lindistill
