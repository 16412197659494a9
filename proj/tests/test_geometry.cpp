#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "campc/geometry.hpp"

using namespace campc;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix random_invertible(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (;;) {
    Matrix L(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) L(i, j) = unit(rng);
    if (std::abs(L.determinant()) > 0.05) return L;
  }
}

}  // namespace

TEST_CASE("ellipsoid_support basics") {
  Ellipsoid ball = Ellipsoid::ball(Vector::Zero(2), 1.0);
  CHECK(ellipsoid_support(vec2(1, 0), ball) == Catch::Approx(1.0).margin(1e-12));
  Ellipsoid shifted = Ellipsoid::ball(vec2(3, 0), 1.0);
  CHECK(ellipsoid_support(vec2(1, 0), shifted) == Catch::Approx(4.0).margin(1e-12));

  Matrix L(2, 2);
  L << 1, 0, 0, 2;
  Ellipsoid e(L, Vector::Zero(2));
  // oracle: maximize over sampled boundary points
  double best = -1e100;
  for (int k = 0; k < 20000; ++k) {
    const double th = 2.0 * M_PI * k / 20000.0;
    Vector x = L.inverse() * vec2(std::cos(th), std::sin(th));
    best = std::max(best, vec2(2, 0).dot(x));
  }
  CHECK(ellipsoid_support(vec2(2, 0), e) == Catch::Approx(best).margin(1e-7));
  CHECK(ellipsoid_support(vec2(2, 0), e) == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("halfspace_covers_ellipsoid basics and signedness") {
  Ellipsoid ball = Ellipsoid::ball(Vector::Zero(2), 1.0);
  CHECK(halfspace_covers_ellipsoid(vec2(1, 0), 2.0, ball));
  CHECK_FALSE(halfspace_covers_ellipsoid(vec2(1, 0), 0.5, ball));
  // ellipsoid entirely on the violating side: the absolute-value variant of
  // the test would call this covered, the signed test must not
  Ellipsoid far_ball = Ellipsoid::ball(vec2(10, 0), 1.0);
  CHECK_FALSE(halfspace_covers_ellipsoid(vec2(1, 0), 2.0, far_ball));
  CHECK(std::abs(2.0 - 10.0) >= 1.0);  // the |b - c q| form would pass here
}

TEST_CASE("covers agrees with the support function on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + int(rng() % 3);
    Matrix L = random_invertible(rng, n);
    Vector q(n), c(n);
    for (int i = 0; i < n; ++i) {
      q(i) = 2.0 * unit(rng);
      c(i) = unit(rng);
    }
    Ellipsoid e(L, q);
    const double b = 3.0 * unit(rng);
    CHECK(halfspace_covers_ellipsoid(c, b, e) == (ellipsoid_support(c, e) <= b));
  }
}

TEST_CASE("affine_image_ellipsoid identity, scaling, projection") {
  Ellipsoid ball = Ellipsoid::ball(Vector::Zero(2), 1.0);
  Ellipsoid same = affine_image_ellipsoid(Matrix::Identity(2, 2), Vector::Zero(2), ball);
  CHECK((same.shape() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);

  Ellipsoid twice = affine_image_ellipsoid(2.0 * Matrix::Identity(2, 2), Vector::Zero(2), ball);
  CHECK(ellipsoid_support(vec2(1, 0), twice) == Catch::Approx(2.0).margin(1e-9));

  Matrix P(1, 2);
  P << 1, 0;
  bool reg = false;
  Ellipsoid interval = affine_image_ellipsoid(P, Vector::Zero(1), ball, &reg);
  CHECK(ellipsoid_support(Vector::Ones(1), interval) == Catch::Approx(1.0).margin(1e-6));

  // rank-deficient map gets an outer-safe inflation
  Matrix Z = Matrix::Zero(2, 2);
  Ellipsoid degen = affine_image_ellipsoid(Z, vec2(1, 1), ball, &reg);
  CHECK(reg);
  CHECK(degen.contains(vec2(1, 1), 1e-12));
}

TEST_CASE("mvee on symmetric points and degenerate sets") {
  std::vector<Vector> pts{vec2(1, 0), vec2(-1, 0), vec2(0, 1), vec2(0, -1)};
  Ellipsoid e = mvee(pts);
  for (const auto& p : pts) CHECK(e.contains(p, 1e-7));
  CHECK(ellipsoid_support(vec2(1, 0), e) == Catch::Approx(1.0).epsilon(5e-3));
  CHECK(ellipsoid_support(vec2(0, 1), e) == Catch::Approx(1.0).epsilon(5e-3));

  Ellipsoid point_fit = mvee({vec2(3, 4)});
  CHECK(point_fit.contains(vec2(3, 4), 1e-9));
  CHECK(ellipsoid_support(vec2(1, 0), point_fit) <= 3.0 + 1e-4);

  CHECK_THROWS_AS(mvee({}), std::invalid_argument);
}

TEST_CASE("mvee encloses zonotope vertices and beats the bounding-box fit") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int g = 3 + int(rng() % 5);
    Matrix gens(2, g);
    for (int k = 0; k < g; ++k) gens.col(k) = vec2(unit(rng), unit(rng));
    Zonotope z(vec2(unit(rng), unit(rng)), gens);
    auto verts = z.vertices();
    Ellipsoid e = mvee(verts);
    double hi_x = -1e100, lo_x = 1e100, hi_y = -1e100, lo_y = 1e100;
    for (const auto& v : verts) {
      CHECK(e.contains(v, 1e-7));
      hi_x = std::max(hi_x, v(0));
      lo_x = std::min(lo_x, v(0));
      hi_y = std::max(hi_y, v(1));
      lo_y = std::min(lo_y, v(1));
    }
    // compare against the ellipse circumscribing the bounding box
    const double ax = std::max(0.5 * (hi_x - lo_x), 1e-9) * std::sqrt(2.0);
    const double ay = std::max(0.5 * (hi_y - lo_y), 1e-9) * std::sqrt(2.0);
    const double vol_box_ellipse = ax * ay;
    const Matrix S = e.shape();
    const double vol_fit = std::sqrt(S.determinant());
    CHECK(vol_fit <= vol_box_ellipse * (1.0 + 1e-6));
  }
}

TEST_CASE("fourier_motzkin_eliminate examples") {
  // {x + u <= 1, 0 <= u <= 0.5}  --eliminate u-->  {x <= 1}
  Matrix C(3, 2);
  C << 1, 1, 0, -1, 0, 1;
  Vector b(3);
  b << 1, 0, 0.5;
  HPolytope out = fourier_motzkin_eliminate(HPolytope(C, b), 1);
  REQUIRE(out.dim() == 1);
  CHECK(lp_support(Vector::Ones(1), out) == Catch::Approx(1.0).margin(1e-9));
  CHECK(std::isinf(lp_support(-Vector::Ones(1), out)));

  // u bounded on its own: x unconstrained
  Matrix C2(2, 2);
  C2 << 0, 1, 0, -1;
  HPolytope out2 = fourier_motzkin_eliminate(HPolytope(C2, Vector::Ones(2)), 1);
  CHECK(out2.rows() == 0);
}

TEST_CASE("fourier_motzkin matches the lifted-LP membership oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int rows = 6 + int(rng() % 8);
    Matrix C(rows + 6, 3);
    Vector b(rows + 6);
    for (int j = 0; j < rows; ++j) {
      Vector c(3);
      c << unit(rng), unit(rng), unit(rng);
      if (c.norm() < 1e-2) c(0) = 1.0;
      C.row(j) = c.transpose() / c.norm();
      b(j) = 0.2 + std::abs(unit(rng));
    }
    for (int i = 0; i < 3; ++i) {  // bounding box
      C.row(rows + 2 * i).setZero();
      C(rows + 2 * i, i) = 1.0;
      C.row(rows + 2 * i + 1).setZero();
      C(rows + 2 * i + 1, i) = -1.0;
      b(rows + 2 * i) = 3.0;
      b(rows + 2 * i + 1) = 3.0;
    }
    HPolytope lifted(C, b);
    HPolytope projected = fourier_motzkin_eliminate(lifted, 2);
    for (int s = 0; s < 20; ++s) {
      Vector xy = vec2(3.5 * unit(rng), 3.5 * unit(rng));
      // oracle: exists z with (xy, z) in lifted?
      Matrix Cz(lifted.rows(), 1);
      Cz = lifted.C.col(2);
      Vector bz = lifted.b - lifted.C.leftCols(2) * xy;
      const bool member_lifted = feasible_point(HPolytope(Cz, bz)).has_value();
      CHECK(projected.contains(xy, 1e-7) == member_lifted);
    }
  }
}

TEST_CASE("remove_redundant_rows examples") {
  Matrix C(2, 1);
  C << 1, 1;
  Vector b(2);
  b << 1, 2;  // x <= 1 dominates x <= 2
  HPolytope out = remove_redundant_rows(HPolytope(C, b));
  REQUIRE(out.rows() == 1);
  CHECK(out.b(0) == Catch::Approx(1.0));

  HPolytope square = HPolytope::box(Vector::Ones(2));
  CHECK(remove_redundant_rows(square).rows() == 4);

  // infeasible: comes back with a small certificate subsystem
  Matrix Ci(3, 1);
  Ci << 1, -1, 1;
  Vector bi(3);
  bi << 1, -2, 5;
  HPolytope cert = remove_redundant_rows(HPolytope(Ci, bi));
  CHECK(cert.rows() >= 1);
  CHECK(cert.rows() <= 2);
  CHECK_FALSE(feasible_point(cert).has_value());
}

TEST_CASE("remove_redundant_rows preserves the set on random polytopes") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    const int rows = 20 + int(rng() % 60);
    Matrix C(rows + 4, 2);
    Vector b(rows + 4);
    for (int j = 0; j < rows; ++j) {
      Vector c = vec2(unit(rng), unit(rng));
      if (c.norm() < 1e-2) c = vec2(1, 0);
      c.normalize();
      C.row(j) = c.transpose();
      b(j) = 0.4 + std::abs(unit(rng));
    }
    C.bottomRows(4) = HPolytope::box(Vector::Ones(2)).C * 0.5;
    b.tail(4) = Vector::Ones(4);
    // duplicate some rows exactly
    C.row(0) = C.row(1);
    b(0) = b(1);
    HPolytope poly(C, b);
    HPolytope pruned = remove_redundant_rows(poly);
    CHECK(pruned.rows() <= poly.rows());
    for (int s = 0; s < 1000; ++s) {
      Vector x = vec2(2.5 * unit(rng), 2.5 * unit(rng));
      CHECK(poly.contains(x, 1e-9) == pruned.contains(x, 1e-9));
    }
  }
}

TEST_CASE("inscribed_ellipsoid on the square, a triangle, and random polytopes") {
  HPolytope square = HPolytope::box(Vector::Ones(2));
  Ellipsoid disc = inscribed_ellipsoid(square);
  for (long j = 0; j < square.rows(); ++j)
    CHECK(halfspace_covers_ellipsoid(square.C.row(j).transpose(), square.b(j), disc));
  // at least the Chebyshev ball, ideally the unit disc
  const double vol = std::sqrt(disc.shape().determinant());
  CHECK(vol >= 0.95);

  Matrix Ct(3, 2);
  Ct << -1, 0, 0, -1, 1, 1;
  Vector bt(3);
  bt << 0, 0, 1;
  Ellipsoid et = inscribed_ellipsoid(HPolytope(Ct, bt));
  for (long j = 0; j < 3; ++j)
    CHECK(halfspace_covers_ellipsoid(Ct.row(j).transpose(), bt(j), et));

  CHECK_THROWS(inscribed_ellipsoid(HPolytope(Matrix::Identity(1, 2).eval(), Vector::Ones(1))));
  Matrix Ce(2, 1);
  Ce << 1, -1;
  Vector be(2);
  be << 1, -2;
  CHECK_THROWS(inscribed_ellipsoid(HPolytope(Ce, be)));

  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 5 + int(rng() % 10);
    Matrix C(rows + 4, 2);
    Vector b(rows + 4);
    for (int j = 0; j < rows; ++j) {
      Vector c = vec2(unit(rng), unit(rng));
      if (c.norm() < 1e-2) c = vec2(1, 0);
      c.normalize();
      C.row(j) = c.transpose();
      b(j) = 0.3 + std::abs(unit(rng));
    }
    C.bottomRows(4) = HPolytope::box(Vector::Ones(2)).C;
    b.tail(4) = 2.0 * Vector::Ones(4);
    HPolytope poly(C, b);
    Ellipsoid e = inscribed_ellipsoid(poly);
    Matrix Li = e.L.inverse();
    for (int s = 0; s < 10000; ++s) {
      Vector w = vec2(gauss(rng), gauss(rng));
      if (w.norm() > 1e-12) w /= w.norm();
      CHECK(poly.contains(e.q + Li * w, 1e-9));
    }
  }
}
