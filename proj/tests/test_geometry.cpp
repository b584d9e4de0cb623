#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lindistill/geometry.hpp"
#include "test_util.hpp"

using namespace lindistill;

namespace {

Matrix random_full_rank(Index d, Index n, Rng& rng) {
  Matrix X(d, n);
  for (Index j = 0; j < n; ++j) X.col(j) = rng.gaussian(d);
  return X;
}

// projection through the normal equations, the independent oracle
Vector normal_equation_projection(const Matrix& X, const Vector& w) {
  const Matrix gram = X.transpose() * X;
  const Vector coeffs = gram.ldlt().solve(X.transpose() * w);
  return X * coeffs;
}

}  // namespace

TEST_CASE("angles on hand instances") {
  Vector e1(2), diag(2), neg(2);
  e1 << 1, 0;
  diag << 1, 1;
  neg << -1, 0;
  CHECK(unsigned_angle(e1, diag) == doctest::Approx(kPi / 4).epsilon(1e-12));
  CHECK(unsigned_angle(e1, e1) == doctest::Approx(0.0).scale(1));
  CHECK(unsigned_angle(e1, neg) == doctest::Approx(0.0).scale(1));
  CHECK(signed_angle(e1, neg) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(signed_angle(e1, diag) == doctest::Approx(kPi / 4).epsilon(1e-12));

  Vector almost = e1 * (1 + 1e-15);
  CHECK(std::isfinite(unsigned_angle(e1, almost)));
  CHECK(unsigned_angle(e1, almost) < 1e-7);
}

TEST_CASE("angle rejects bad input") {
  Vector a(2), b(3), z(2);
  a << 1, 0;
  b << 1, 0, 0;
  z << 0, 0;
  CHECK_THROWS_AS(unsigned_angle(a, b), std::invalid_argument);
  CHECK_THROWS_AS(unsigned_angle(a, z), std::domain_error);
  CHECK_THROWS_AS(signed_angle(z, a), std::domain_error);
}

TEST_CASE("span basis is orthonormal and rank checked") {
  Matrix X(3, 2);
  X << 1, 1, 0, 1, 0, 0;
  const Matrix Q = span_basis(X);
  CHECK(Q.rows() == 3);
  CHECK(Q.cols() == 2);
  CHECK((Q.transpose() * Q - Matrix::Identity(2, 2)).norm() < 1e-12);

  Matrix bad(3, 2);
  bad.col(0) << 1, 2, 3;
  bad.col(1) = 2 * bad.col(0);
  CHECK_THROWS_AS(span_basis(bad), singular_error);
}

TEST_CASE("projection matches the normal equations") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const Matrix X = random_full_rank(7, 3, rng);
    const Vector w = rng.gaussian(7);
    const Vector p = project_onto_span(X, w);
    const Vector oracle = normal_equation_projection(X, w);
    CHECK((p - oracle).norm() < 1e-10);

    // idempotent, residual orthogonal to the span
    CHECK((project_onto_span(X, p) - p).norm() < 1e-10);
    CHECK((X.transpose() * (w - p)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("projection with n >= d is the identity") {
  Rng rng(17);
  const Matrix X = random_full_rank(4, 9, rng);
  const Vector w = rng.gaussian(4);
  CHECK(project_onto_span(X, w) == w);
}

TEST_CASE("orthogonal complement sample") {
  Rng rng(23);
  const Matrix X = random_full_rank(8, 3, rng);
  const Vector q = orthogonal_complement_sample(X, rng);
  CHECK(q.size() == 8);
  CHECK(q.norm() > 0);
  CHECK((X.transpose() * q).cwiseAbs().maxCoeff() < 1e-10);

  const Matrix wide = random_full_rank(3, 5, rng);
  CHECK_THROWS_AS(orthogonal_complement_sample(wide, rng),
                  std::invalid_argument);
}

TEST_CASE("pcurve validation and interpolation") {
  PCurve c;
  c.thetas = Vector(2);
  c.values = Vector(2);
  c.thetas << 0, kPi / 2;
  c.values << 1, 0;
  c.validate();
  CHECK(c.at(kPi / 4) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.at(-1.0) == 1.0);
  CHECK(c.at(2.0) == 0.0);

  PCurve bad_grid = c;
  bad_grid.thetas << kPi / 2, 0;
  CHECK_THROWS_AS(bad_grid.validate(), std::invalid_argument);

  PCurve rising = c;
  rising.values << 0, 1;
  CHECK_THROWS_AS(rising.validate(), std::domain_error);
}

TEST_CASE("reverse cdf estimate on a deterministic sampler") {
  Vector w_star(2);
  w_star << 1, 0;
  const InputSampler diag_sampler = [](Rng&, Eigen::Ref<Vector> out) {
    out << 1, 1;
  };
  Vector grid(3);
  grid << 0.1, kPi / 4, 1.0;
  Rng rng(1);
  const PCurve c = reverse_cdf_estimate(diag_sampler, w_star, grid, 500, rng);
  CHECK(c.values[0] == 1.0);
  CHECK(c.values[1] == 1.0);  // the angle equals pi/4, >= is inclusive
  CHECK(c.values[2] == 0.0);
}

TEST_CASE("reverse cdf estimate survives occasional zero draws") {
  Vector w_star(2);
  w_star << 1, 0;
  int calls = 0;
  const InputSampler flaky = [&calls](Rng&, Eigen::Ref<Vector> out) {
    if (++calls % 2 == 0)
      out << 0, 0;
    else
      out << 0, 3;
  };
  Vector grid(2);
  grid << 0.5, 1.5;
  Rng rng(1);
  const PCurve c = reverse_cdf_estimate(flaky, w_star, grid, 200, rng);
  CHECK(c.values[0] == 1.0);  // every kept draw sits at pi/2
  CHECK(c.values[1] == 1.0);
  c.validate();
}
