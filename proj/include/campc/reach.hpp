#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "campc/geometry.hpp"
#include "campc/lp.hpp"
#include "campc/model.hpp"
#include "campc/types.hpp"

namespace campc {

/// Converts a polytopic input set to a zonotope when it is an axis-aligned
/// box; anything else at these sizes indicates a configuration problem.
inline Zonotope input_zonotope(const HPolytope& U) {
  const int m = U.dim();
  Vector lo = Vector::Constant(m, -std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(m, std::numeric_limits<double>::infinity());
  for (long j = 0; j < U.rows(); ++j) {
    int nz = 0, axis = -1;
    for (int i = 0; i < m; ++i)
      if (U.C(j, i) != 0.0) {
        ++nz;
        axis = i;
      }
    if (nz != 1)
      throw std::invalid_argument(
          "input_zonotope: input set is not an axis-aligned box; supply a zonotope or an outer box");
    const double a = U.C(j, axis);
    const double bound = U.b(j) / a;
    if (a > 0.0)
      hi(axis) = std::min(hi(axis), bound);
    else
      lo(axis) = std::max(lo(axis), bound);
  }
  if (!lo.allFinite() || !hi.allFinite() || ((hi - lo).minCoeff() < 0.0))
    throw std::invalid_argument("input_zonotope: input box unbounded or empty");
  Matrix gens = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) gens(i, i) = 0.5 * (hi(i) - lo(i));
  return Zonotope(0.5 * (lo + hi), gens);
}

/// Zero-initial-state forward reachable sets for i = 1..N, carried exactly as
/// zonotopes: step i collects the generator blocks A^{i-1-j} B g.
inline std::vector<Zonotope> forward_reach(const LtiSystem& sys, const Zonotope& U_set, int N) {
  if (N < 1) throw std::invalid_argument("forward_reach: N must be >= 1");
  if (U_set.dim() != sys.input_dim())
    throw std::invalid_argument("forward_reach: input set dimension mismatch");
  std::vector<Zonotope> out;
  out.reserve(std::size_t(N));
  Zonotope cur = Zonotope::point(Vector::Zero(sys.state_dim()));
  const Zonotope BU = U_set.linear_map(sys.B);
  for (int i = 1; i <= N; ++i) {
    cur = cur.linear_map(sys.A).minkowski_sum(BU);
    out.push_back(cur);
  }
  return out;
}

struct ForwardReachOffline {
  std::vector<Ellipsoid> fits;   // outer, one per step i = 1..N
  std::vector<Zonotope> sets;    // the exact zonotopes
};

/// Outer ellipsoids of the forward zonotopes, certified on the vertex sets.
inline ForwardReachOffline fit_forward(const std::vector<Zonotope>& zonotopes) {
  ForwardReachOffline out;
  out.sets = zonotopes;
  out.fits.reserve(zonotopes.size());
  for (const auto& z : zonotopes) {
    Ellipsoid e = mvee(z.vertices());
    for (const auto& v : z.vertices())
      if (!e.contains(v, 1e-7))
        throw std::runtime_error("fit_forward: containment certificate failed");
    out.fits.push_back(std::move(e));
  }
  return out;
}

/// Backward reachable polytopes of the terminal set for i = N-1 down to 1:
/// each step is the exact Fourier-Motzkin projection of
/// {(x,u) : C (A x + B u) <= b, u in U}, returned in ascending step order.
inline std::vector<HPolytope> backward_reach(const LtiSystem& sys, const HPolytope& U,
                                             const HPolytope& X_N, int N) {
  if (N < 1) throw std::invalid_argument("backward_reach: N must be >= 1");
  if (X_N.dim() != sys.state_dim()) throw std::invalid_argument("backward_reach: X_N dimension mismatch");
  const int n = sys.state_dim(), m = sys.input_dim();
  std::vector<HPolytope> out(std::size_t(N > 0 ? N - 1 : 0), HPolytope::universe(n));
  HPolytope cur = X_N;
  for (int i = N - 1; i >= 1; --i) {
    // lift to (x, u): rows [C A, C B] <= b plus the input rows
    Matrix Cl(cur.rows() + U.rows(), n + m);
    Vector bl(cur.rows() + U.rows());
    Cl.topLeftCorner(cur.rows(), n) = cur.C * sys.A;
    Cl.topRightCorner(cur.rows(), m) = cur.C * sys.B;
    bl.head(cur.rows()) = cur.b;
    Cl.bottomLeftCorner(U.rows(), n).setZero();
    Cl.bottomRightCorner(U.rows(), m) = U.C;
    bl.tail(U.rows()) = U.b;
    HPolytope lifted(std::move(Cl), std::move(bl));
    for (int k = 0; k < m; ++k) lifted = fourier_motzkin_eliminate(lifted, lifted.dim() - 1);
    if (lifted.rows() > 0) {
      auto fp = feasible_point(lifted);
      if (!fp)
        throw std::runtime_error("backward_reach: empty iterate at step " + std::to_string(i));
    }
    cur = lifted;
    out[std::size_t(i - 1)] = cur;
  }
  return out;
}

struct BackwardReachOffline {
  std::vector<Ellipsoid> fits;   // inner, one per step i = 1..N-1
  std::vector<HPolytope> sets;   // the exact polytope iterates
};

/// Inner ellipsoids of the backward polytopes with the per-row containment
/// certificate enforced on every fit.
inline BackwardReachOffline fit_backward(const std::vector<HPolytope>& polytopes) {
  BackwardReachOffline out;
  out.sets = polytopes;
  out.fits.reserve(polytopes.size());
  for (std::size_t i = 0; i < polytopes.size(); ++i) {
    Ellipsoid e;
    try {
      e = inscribed_ellipsoid(polytopes[i]);
    } catch (const std::exception& ex) {
      throw std::runtime_error("fit_backward: step " + std::to_string(i + 1) + ": " + ex.what());
    }
    for (long j = 0; j < polytopes[i].rows(); ++j) {
      const Vector c = polytopes[i].C.row(j).transpose();
      if (!halfspace_covers_ellipsoid(c, polytopes[i].b(j), e))
        throw std::runtime_error("fit_backward: containment certificate failed at step " +
                                 std::to_string(i + 1));
    }
    out.fits.push_back(std::move(e));
  }
  return out;
}

}  // namespace campc
