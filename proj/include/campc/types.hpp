#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace campc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Polyhedron in halfspace form {x : C x <= b}. A polytope with zero rows is
/// the whole space of the given dimension.
struct HPolytope {
  Matrix C;
  Vector b;

  HPolytope() : C(0, 0), b(0) {}

  HPolytope(Matrix C_in, Vector b_in) : C(std::move(C_in)), b(std::move(b_in)) {
    if (C.rows() != b.size()) throw std::invalid_argument("HPolytope: C rows and b length differ");
    if (C.cols() < 1) throw std::invalid_argument("HPolytope: dimension must be >= 1");
    if (C.size() > 0 && !C.allFinite()) throw std::invalid_argument("HPolytope: non-finite row");
    if (b.size() > 0 && !b.allFinite()) throw std::invalid_argument("HPolytope: non-finite offset");
  }

  static HPolytope universe(int dim) { return HPolytope(Matrix(0, dim), Vector(0)); }

  /// Axis-aligned box {|x_i| <= radius_i}.
  static HPolytope box(const Vector& radius) {
    const int n = static_cast<int>(radius.size());
    Matrix C(2 * n, n);
    Vector b(2 * n);
    C.setZero();
    for (int i = 0; i < n; ++i) {
      C(2 * i, i) = 1.0;
      C(2 * i + 1, i) = -1.0;
      b(2 * i) = radius(i);
      b(2 * i + 1) = radius(i);
    }
    return HPolytope(std::move(C), std::move(b));
  }

  int dim() const { return static_cast<int>(C.cols()); }
  Eigen::Index rows() const { return C.rows(); }

  double max_violation(const Vector& x) const {
    if (rows() == 0) return 0.0;
    return (C * x - b).maxCoeff();
  }

  bool contains(const Vector& x, double tol = 1e-9) const { return max_violation(x) <= tol; }

  /// Stack the rows of two polytopes over the same space.
  HPolytope intersect(const HPolytope& other) const {
    if (other.dim() != dim()) throw std::invalid_argument("HPolytope::intersect: dimension mismatch");
    Matrix C2(rows() + other.rows(), dim());
    Vector b2(rows() + other.rows());
    C2 << C, other.C;
    b2 << b, other.b;
    return HPolytope(std::move(C2), std::move(b2));
  }
};

/// Ellipsoid {x : ||L (x - q)||_2 <= 1} with invertible shape factor L.
struct Ellipsoid {
  Matrix L;
  Vector q;

  Ellipsoid() = default;

  Ellipsoid(Matrix L_in, Vector q_in) : L(std::move(L_in)), q(std::move(q_in)) {
    if (L.rows() != L.cols()) throw std::invalid_argument("Ellipsoid: L must be square");
    if (L.rows() != q.size()) throw std::invalid_argument("Ellipsoid: L and q dimension mismatch");
    if (!L.allFinite() || !q.allFinite()) throw std::invalid_argument("Ellipsoid: non-finite data");
    Eigen::FullPivLU<Matrix> lu(L);
    if (!lu.isInvertible()) throw std::invalid_argument("Ellipsoid: L is singular");
  }

  static Ellipsoid ball(const Vector& center, double radius) {
    if (radius <= 0.0) throw std::invalid_argument("Ellipsoid::ball: radius must be positive");
    const int n = static_cast<int>(center.size());
    return Ellipsoid(Matrix::Identity(n, n) / radius, center);
  }

  /// Build from a symmetric PSD shape matrix S, i.e. {x : (x-q)^T S^{-1} (x-q) <= 1}.
  /// Eigenvalues of S below min_axis^2 are clamped, which only enlarges the set.
  static Ellipsoid from_shape(const Matrix& shape, const Vector& center, double min_axis,
                              bool* regularized = nullptr) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (shape + shape.transpose()));
    Vector ev = es.eigenvalues();
    const double floor_ev = std::max(min_axis * min_axis, 0.0);
    bool clamped = false;
    for (int i = 0; i < ev.size(); ++i) {
      if (ev(i) < floor_ev) {
        ev(i) = floor_ev;
        clamped = true;
      }
    }
    if (regularized) *regularized = clamped;
    Matrix L = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
               es.eigenvectors().transpose();
    return Ellipsoid(std::move(L), center);
  }

  int dim() const { return static_cast<int>(q.size()); }

  /// Shape matrix (L^T L)^{-1}.
  Matrix shape() const {
    Matrix Li = L.inverse();
    return Li * Li.transpose();
  }

  bool contains(const Vector& x, double tol = 1e-9) const {
    return (L * (x - q)).norm() <= 1.0 + tol;
  }
};

/// Zonotope center + sum_k [-1,1] * g_k, generators stored as columns.
struct Zonotope {
  Vector center;
  Matrix generators;

  Zonotope() = default;

  Zonotope(Vector center_in, Matrix generators_in)
      : center(std::move(center_in)), generators(std::move(generators_in)) {
    if (generators.size() > 0 && generators.rows() != center.size())
      throw std::invalid_argument("Zonotope: generator dimension mismatch");
    if (generators.size() == 0) generators = Matrix(center.size(), 0);
  }

  static Zonotope point(const Vector& center) {
    return Zonotope(center, Matrix(center.size(), 0));
  }

  int dim() const { return static_cast<int>(center.size()); }
  int num_generators() const { return static_cast<int>(generators.cols()); }

  Zonotope linear_map(const Matrix& M) const { return Zonotope(M * center, M * generators); }

  Zonotope minkowski_sum(const Zonotope& other) const {
    Matrix g(dim(), num_generators() + other.num_generators());
    g << generators, other.generators;
    return Zonotope(center + other.center, std::move(g));
  }

  double support(const Vector& c) const {
    double s = c.dot(center);
    for (int k = 0; k < num_generators(); ++k) s += std::abs(c.dot(generators.col(k)));
    return s;
  }

  /// Vertices; exact walk in 2-D, sign enumeration otherwise (capped at 16 generators).
  std::vector<Vector> vertices() const {
    const int g = num_generators();
    if (g == 0) return {center};
    if (dim() == 2) return vertices2d();
    if (g > 16) throw std::invalid_argument("Zonotope::vertices: too many generators for enumeration");
    std::vector<Vector> out;
    out.reserve(std::size_t(1) << g);
    for (std::size_t mask = 0; mask < (std::size_t(1) << g); ++mask) {
      Vector v = center;
      for (int k = 0; k < g; ++k) {
        if ((mask >> k) & 1U)
          v += generators.col(k);
        else
          v -= generators.col(k);
      }
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::vector<Vector> vertices2d() const {
    const int g = num_generators();
    std::vector<Vector> gens;
    gens.reserve(g);
    Vector start = center;
    for (int k = 0; k < g; ++k) {
      Vector v = generators.col(k);
      if (v(1) < 0.0 || (v(1) == 0.0 && v(0) < 0.0)) v = -v;
      gens.push_back(v);
      start -= v;
    }
    std::sort(gens.begin(), gens.end(), [](const Vector& a, const Vector& b) {
      return std::atan2(a(1), a(0)) < std::atan2(b(1), b(0));
    });
    std::vector<Vector> out;
    out.reserve(2 * g);
    Vector v = start;
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < g; ++k) {
        out.push_back(v);
        v += (pass == 0 ? 2.0 : -2.0) * gens[k];
      }
    return out;
  }
};

}  // namespace campc
