#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "campc/lp.hpp"

using namespace campc;

namespace {

HPolytope square2() { return HPolytope::box(Vector::Ones(2)); }

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("lp_solve on the unit box") {
  LpResult r = lp_solve(vec2(1.0, 0.0), square2());
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == Catch::Approx(1.0).margin(1e-10));
  CHECK(r.x(0) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("lp_solve detects contradictory rows") {
  Matrix C(2, 1);
  C << 1.0, -1.0;
  Vector b(2);
  b << 1.0, -2.0;  // x <= 1 and x >= 2
  LpResult r = lp_solve(Vector::Ones(1), HPolytope(C, b));
  REQUIRE(r.status == LpStatus::Infeasible);
  CHECK(r.certificate.size() >= 1);
}

TEST_CASE("lp_solve on the diamond") {
  Matrix C(4, 2);
  C << 1, 1, 1, -1, -1, 1, -1, -1;
  Vector b = Vector::Ones(4);
  LpResult r = lp_solve(vec2(1.0, 1.0), HPolytope(C, b));
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("lp_solve unbounded and empty directions") {
  Matrix C(1, 2);
  C << 1.0, 0.0;  // x0 <= 1, x1 free
  Vector b = Vector::Ones(1);
  CHECK(lp_solve(vec2(0.0, 1.0), HPolytope(C, b)).status == LpStatus::Unbounded);
  CHECK(lp_solve(vec2(1.0, 0.0), HPolytope(C, b)).status == LpStatus::Optimal);
  CHECK(std::isinf(lp_support(vec2(0.0, -1.0), HPolytope(C, b))));
  CHECK(lp_solve(vec2(1.0, 0.0), HPolytope::universe(2)).status == LpStatus::Unbounded);
  CHECK(lp_solve(Vector::Zero(2), HPolytope::universe(2)).status == LpStatus::Optimal);
}

TEST_CASE("lp_solve dimension mismatch") {
  CHECK_THROWS_AS(lp_solve(Vector::Ones(3), square2()), std::invalid_argument);
}

TEST_CASE("lp_solve agrees with vertex enumeration on random 2-D polytopes") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int extra = 3 + int(rng() % 6);
    Matrix C(4 + extra, 2);
    Vector b(4 + extra);
    C.topRows(4) = square2().C * 0.5;
    b.head(4) = Vector::Ones(4);  // box of radius 2
    for (int j = 0; j < extra; ++j) {
      Vector c = vec2(unit(rng), unit(rng));
      if (c.norm() < 1e-3) c = vec2(1.0, 0.0);
      C.row(4 + j) = c.transpose() / c.norm();
      b(4 + j) = 0.3 + 0.8 * std::abs(unit(rng));
    }
    HPolytope poly(C, b);
    Vector cost = vec2(unit(rng), unit(rng));
    LpResult r = lp_solve(cost, poly);
    REQUIRE(r.status == LpStatus::Optimal);
    // brute force: intersect all row pairs, keep feasible points
    double best = -1e100;
    for (long i = 0; i < poly.rows(); ++i)
      for (long j = i + 1; j < poly.rows(); ++j) {
        Matrix A(2, 2);
        A << poly.C.row(i), poly.C.row(j);
        if (std::abs(A.determinant()) < 1e-9) continue;
        Vector rhs(2);
        rhs << poly.b(i), poly.b(j);
        Vector v = A.partialPivLu().solve(rhs);
        if (poly.contains(v, 1e-7)) best = std::max(best, cost.dot(v));
      }
    CHECK(r.value == Catch::Approx(best).margin(1e-6));
    CHECK(poly.contains(r.x, 1e-7));
    // dual optimality: value match from reported multipliers
    REQUIRE(r.dual.size() == poly.rows());
    CHECK(r.dual.minCoeff() >= -1e-9);
    CHECK((poly.C.transpose() * r.dual - cost).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}

TEST_CASE("feasible_point and chebyshev_ball") {
  auto fp = feasible_point(square2());
  REQUIRE(fp.has_value());
  CHECK(square2().contains(fp->x, 1e-9));
  CHECK(fp->margin > 0.1);

  Matrix C(2, 1);
  C << 1.0, -1.0;
  Vector b(2);
  b << 1.0, -2.0;
  CHECK_FALSE(feasible_point(HPolytope(C, b)).has_value());

  auto ball = chebyshev_ball(square2());
  REQUIRE(ball.bounded);
  CHECK(ball.radius == Catch::Approx(1.0).margin(1e-7));
  CHECK(ball.center.lpNorm<Eigen::Infinity>() <= 1e-7);

  // slab: finite inradius, unbounded set
  Matrix Cs(2, 2);
  Cs << 1, 0, -1, 0;
  auto slab = chebyshev_ball(HPolytope(Cs, Vector::Ones(2)));
  REQUIRE(slab.bounded);
  CHECK(slab.radius == Catch::Approx(1.0).margin(1e-7));

  auto half = chebyshev_ball(HPolytope(Matrix::Identity(1, 2).eval(), Vector::Ones(1)));
  CHECK_FALSE(half.bounded);
}
