#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "lindistill/rng.hpp"

using namespace lindistill;

TEST_CASE("same seed reproduces the stream exactly") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(c.uniform() == d.uniform());
    CHECK(c.normal() == d.normal());
  }
}

TEST_CASE("uniform ranges") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_open();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("integer stays below the bound and hits every residue") {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t k = rng.integer(7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("normal moments") {
  Rng rng(11);
  const int m = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < m; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / m;
  const double var = sq / m - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("unit sphere draws are unit and not axis aligned") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vector v = rng.unit_sphere(6);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sign is a coin") {
  Rng rng(9);
  int pos = 0;
  for (int i = 0; i < 10000; ++i) {
    const double s = rng.sign();
    CHECK((s == 1.0 || s == -1.0));
    if (s > 0) ++pos;
  }
  CHECK(pos > 4700);
  CHECK(pos < 5300);
}

TEST_CASE("derived seeds separate by label and index") {
  const auto s1 = derive_seed(1, "alpha", 0);
  CHECK(derive_seed(1, "alpha", 0) == s1);
  CHECK(derive_seed(1, "alpha", 1) != s1);
  CHECK(derive_seed(1, "beta", 0) != s1);
  CHECK(derive_seed(2, "alpha", 0) != s1);

  Rng a = derive_stream(1, "alpha", 0);
  Rng b = derive_stream(1, "alpha", 1);
  int equal = 0;
  for (int i = 0; i < 8; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}
