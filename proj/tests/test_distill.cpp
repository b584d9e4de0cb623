#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "lindistill/distill.hpp"
#include "lindistill/tasks.hpp"
#include "test_util.hpp"

using namespace lindistill;

namespace {

TransferSet random_instance(Index d, Index n, std::uint64_t seed) {
  Rng rng(seed);
  TransferSet ts;
  ts.X = Matrix(d, n);
  for (Index j = 0; j < n; ++j) ts.X.col(j) = rng.gaussian(d);
  ts.w_star = rng.unit_sphere(d);
  ts.y = Vector(n);
  for (Index j = 0; j < n; ++j) ts.y[j] = soft_label(ts.w_star, ts.X.col(j));
  ts.validate();
  return ts;
}

}  // namespace

TEST_CASE("single point values by hand") {
  TransferSet ts;
  ts.X = Matrix(1, 1);
  ts.X << 1;
  ts.w_star = Vector(1);
  ts.w_star << 1;
  ts.y = Vector(1);
  const double y = sigmoid(1.0);
  ts.y << y;
  ts.validate();

  Vector zero(1);
  zero << 0;
  const double expected = std::log(2.0) + y * std::log(y) + (1 - y) * std::log(1 - y);
  CHECK(loss(zero, ts) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(loss(zero, ts) == doctest::Approx(0.11094407167172737).epsilon(1e-12));
  CHECK(loss_gradient(zero, ts)[0] ==
        doctest::Approx(0.5 - y).epsilon(1e-14));
  CHECK(loss_hessian(zero, ts)(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(loss(ts.w_star, ts) == 0.0);
}

TEST_CASE("loss vanishes exactly at the teacher") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TransferSet ts = random_instance(5, 8, seed + 1);
    CHECK(loss(ts.w_star, ts) >= 0.0);
    CHECK(loss(ts.w_star, ts) < 1e-13);
    CHECK(loss_gradient(ts.w_star, ts).norm() < 1e-13);
  }
}

TEST_CASE("gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TransferSet ts = random_instance(5, 8, seed + 10);
    Rng rng(seed + 500);
    const Vector w = rng.gaussian(5);
    const Vector g = loss_gradient(w, ts);
    const Vector fd = testutil::fd_gradient(
        [&](const Vector& v) { return loss(v, ts); }, w);
    CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("hessian matches differenced gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TransferSet ts = random_instance(4, 6, seed + 30);
    Rng rng(seed + 700);
    const Vector w = rng.gaussian(4);
    const Matrix H = loss_hessian(w, ts);
    Matrix fd(4, 4);
    const double h = 1e-6;
    for (Index i = 0; i < 4; ++i) {
      Vector wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      fd.col(i) = (loss_gradient(wp, ts) - loss_gradient(wm, ts)) / (2 * h);
    }
    CHECK((H - fd).norm() <= 1e-4 * std::max(1.0, H.norm()));
    CHECK((H - H.transpose()).norm() < 1e-12);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("gradient lies in the span of the data") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TransferSet ts = random_instance(9, 3, seed + 40);
    Rng rng(seed + 900);
    const Vector w = rng.gaussian(9);
    const Vector g = loss_gradient(w, ts);
    const Vector resid = g - project_onto_span(ts.X, g);
    CHECK(resid.norm() <= 1e-10 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("loss is convex along segments") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TransferSet ts = random_instance(5, 7, seed + 50);
    Rng rng(seed + 1100);
    const Vector a = rng.gaussian(5);
    const Vector b = rng.gaussian(5);
    const double mid = loss(0.5 * (a + b), ts);
    CHECK(mid <= 0.5 * (loss(a, ts) + loss(b, ts)) + 1e-12);
    CHECK(loss(a, ts) >= 0.0);
  }
}

TEST_CASE("closed form with enough data returns the teacher") {
  const TransferSet ts = random_instance(4, 9, 60);
  CHECK(closed_form_solution(ts) == ts.w_star);
}

TEST_CASE("closed form below the data threshold projects the teacher") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TransferSet ts = random_instance(9, 4, seed + 70);
    const Vector w_hat = closed_form_solution(ts);
    const Matrix gram = ts.X.transpose() * ts.X;
    const Vector oracle =
        ts.X * gram.ldlt().solve(ts.X.transpose() * ts.w_star);
    CHECK((w_hat - oracle).norm() < 1e-10);
    CHECK(is_global_minimizer(w_hat, ts));
  }
}

TEST_CASE("closed form rejects rank deficient data") {
  TransferSet ts;
  ts.X = Matrix(2, 3);
  Vector v(2);
  v << 1, 2;
  ts.X.col(0) = v;
  ts.X.col(1) = 2 * v;
  ts.X.col(2) = -v;
  ts.w_star = Vector(2);
  ts.w_star << 0, 1;
  ts.y = Vector(3);
  for (Index j = 0; j < 3; ++j) ts.y[j] = soft_label(ts.w_star, ts.X.col(j));
  CHECK_THROWS_AS(closed_form_solution(ts), singular_error);

  TransferSet thin;
  thin.X = Matrix(3, 2);
  thin.X.col(0) << 1, 1, 0;
  thin.X.col(1) = 2 * thin.X.col(0);
  thin.w_star = Vector(3);
  thin.w_star << 1, 0, 0;
  thin.y = Vector(2);
  for (Index j = 0; j < 2; ++j)
    thin.y[j] = soft_label(thin.w_star, thin.X.col(j));
  CHECK_THROWS_AS(closed_form_solution(thin), singular_error);
}

TEST_CASE("global minimizer test") {
  const TransferSet ts = random_instance(8, 3, 80);
  const Vector w_hat = closed_form_solution(ts);
  CHECK(is_global_minimizer(ts.w_star, ts));
  CHECK(is_global_minimizer(w_hat, ts));

  Rng rng(81);
  const Vector q = orthogonal_complement_sample(ts.X, rng);
  CHECK(is_global_minimizer(w_hat + 3.0 * q, ts));
  CHECK_FALSE(is_global_minimizer(w_hat + 0.1 * ts.X.col(0), ts));

  TransferSet hard;
  hard.X = Matrix(1, 2);
  hard.X << 1, -1;
  hard.w_star = Vector(1);
  hard.w_star << 1;
  hard.y = Vector(2);
  hard.y << 1.0, 0.5;
  Vector w(1);
  w << 1;
  CHECK_THROWS_AS(is_global_minimizer(w, hard), std::domain_error);
}

TEST_CASE("transfer set validation catches tampered labels") {
  TransferSet ts = random_instance(3, 4, 90);
  ts.validate();
  ts.y[2] += 1e-6;
  CHECK_THROWS_AS(ts.validate(), std::domain_error);

  TransferSet shapes = random_instance(3, 4, 91);
  shapes.y = Vector(3);
  CHECK_THROWS_AS(shapes.validate(), std::invalid_argument);
}
