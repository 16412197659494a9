#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "campc/types.hpp"

namespace campc {

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

struct LpResult {
  LpStatus status = LpStatus::NumericalFailure;
  Vector x;                        // maximizer (Optimal only)
  double value = 0.0;              // max of cost^T x (Optimal only)
  Vector dual;                     // row multipliers >= 0 (Optimal only)
  std::vector<int> certificate;    // Farkas support rows (Infeasible only)
  std::string message;
};

namespace detail {

// Revised simplex on the dual of  max c^T x  s.t.  A x <= b  (x free):
//   min b^T y  s.t.  A^T y = c,  y >= 0.
// The basis has size n (the x dimension), so many-row problems stay cheap.
// Bland's smallest-index rule throughout; the basis is refactorized every
// iteration, which is fine at these dimensions.
class DualSimplex {
 public:
  DualSimplex(const Matrix& A, const Vector& b) : m_(int(A.rows())), n_(int(A.cols())) {
    cols_ = A.transpose();  // n x m
    cost_.resize(m_);
    scale_.resize(m_);
    for (int j = 0; j < m_; ++j) {
      double s = cols_.col(j).norm();
      if (s < 1e-300) s = 1.0;
      scale_(j) = s;
      cols_.col(j) /= s;
      cost_(j) = b(j) / s;
    }
  }

  struct Outcome {
    enum Kind { DualOptimal, DualUnbounded, DualInfeasible, Breakdown } kind = Breakdown;
    Vector x;                     // primal point (DualOptimal)
    double value = 0.0;           // common optimal value (DualOptimal)
    Vector y;                     // dual values per original row (DualOptimal)
    std::vector<int> ray_rows;    // support of the unbounded dual ray (DualUnbounded)
    std::string message;
  };

  // Solves for right-hand side c (the primal cost).
  Outcome run(const Vector& c) {
    rhs_ = c;
    basis_.resize(n_);
    art_sign_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      art_sign_(i) = (c(i) < 0.0) ? -1.0 : 1.0;
      basis_[i] = m_ + i;  // artificial columns
    }
    Outcome out;
    if (!phase(true, out)) return out;
    // phase-1 optimum must be ~0 for dual feasibility
    Vector xb = basic_values();
    double art_residual = 0.0;
    for (int i = 0; i < n_; ++i)
      if (basis_[i] >= m_) art_residual += std::abs(xb(i));
    const double scale = 1.0 + rhs_.cwiseAbs().maxCoeff();
    if (art_residual > 1e-8 * scale) {
      out.kind = Outcome::DualInfeasible;
      return out;
    }
    if (!phase(false, out)) return out;
    if (out.kind == Outcome::DualUnbounded) return out;
    finish(out);
    return out;
  }

 private:
  int m_, n_;
  Matrix cols_;     // n x m scaled columns of A^T
  Vector cost_;     // scaled b
  Vector scale_;
  Vector rhs_;
  std::vector<int> basis_;
  Vector art_sign_;
  Eigen::PartialPivLU<Matrix> lu_;

  Vector col(int j) const {
    if (j < m_) return cols_.col(j);
    Vector e = Vector::Zero(n_);
    e(j - m_) = art_sign_(j - m_);
    return e;
  }

  double col_cost(bool phase1, int j) const {
    if (phase1) return j >= m_ ? 1.0 : 0.0;
    return j < m_ ? cost_(j) : 0.0;
  }

  void factorize() {
    Matrix B(n_, n_);
    for (int i = 0; i < n_; ++i) B.col(i) = col(basis_[i]);
    lu_.compute(B);
  }

  Vector basic_values() {
    factorize();
    return lu_.solve(rhs_);
  }

  // One simplex phase. Returns false on breakdown (outcome filled).
  bool phase(bool phase1, Outcome& out) {
    const double tol = 1e-10;
    const long max_iters = 400 + 16L * (m_ + n_);
    std::vector<char> in_basis(m_ + n_, 0);
    for (int i = 0; i < n_; ++i) in_basis[std::size_t(basis_[i])] = 1;
    for (long iter = 0; iter < max_iters; ++iter) {
      factorize();
      Vector xb = lu_.solve(rhs_);
      Vector cb(n_);
      for (int i = 0; i < n_; ++i) cb(i) = col_cost(phase1, basis_[i]);
      Vector pi = lu_.transpose().solve(cb);
      // pricing, Bland: smallest eligible index
      int enter = -1;
      for (int j = 0; j < m_; ++j) {
        if (in_basis[std::size_t(j)]) continue;
        const double red = col_cost(phase1, j) - pi.dot(cols_.col(j));
        if (red < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) {
        out.kind = Outcome::DualOptimal;  // provisional; caller interprets
        return true;
      }
      Vector w = lu_.solve(col(enter));
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n_; ++i) {
        if (w(i) > tol) {
          const double ratio = std::max(xb(i), 0.0) / w(i);
          if (ratio < best - 1e-12 ||
              (ratio < best + 1e-12 && (leave < 0 || basis_[i] < basis_[leave]))) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        if (phase1) {
          out.kind = Outcome::Breakdown;
          out.message = "phase-1 unbounded";
          return false;
        }
        out.kind = Outcome::DualUnbounded;
        out.ray_rows.clear();
        if (enter < m_) out.ray_rows.push_back(enter);
        for (int i = 0; i < n_; ++i)
          if (basis_[i] < m_ && w(i) < -tol) out.ray_rows.push_back(basis_[i]);
        return true;
      }
      in_basis[std::size_t(basis_[leave])] = 0;
      in_basis[std::size_t(enter)] = 1;
      basis_[leave] = enter;
    }
    out.kind = Outcome::Breakdown;
    out.message = phase1 ? "phase-1 iteration limit" : "phase-2 iteration limit";
    return false;
  }

  // Recover the primal maximizer from the optimal dual basis.
  void finish(Outcome& out) {
    // Drive artificial columns out of the basis where possible.
    factorize();
    for (int i = 0; i < n_; ++i) {
      if (basis_[i] < m_) continue;
      std::vector<char> in_basis(m_, 0);
      for (int k = 0; k < n_; ++k)
        if (basis_[k] < m_) in_basis[std::size_t(basis_[k])] = 1;
      for (int j = 0; j < m_; ++j) {
        if (in_basis[std::size_t(j)]) continue;
        Vector w = lu_.solve(cols_.col(j));
        if (std::abs(w(i)) > 1e-7) {
          basis_[i] = j;
          factorize();
          break;
        }
      }
    }
    Vector xb = basic_values();
    Vector cb(n_);
    bool has_artificial = false;
    for (int i = 0; i < n_; ++i) {
      cb(i) = col_cost(false, basis_[i]);
      has_artificial |= basis_[i] >= m_;
    }
    out.x = lu_.transpose().solve(cb);
    out.y = Vector::Zero(m_);
    double val = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (basis_[i] < m_) {
        const double yj = std::max(xb(i), 0.0) / scale_(basis_[i]);
        out.y(basis_[i]) = yj;
        val += cost_(basis_[i]) * std::max(xb(i), 0.0);
      }
    }
    out.value = val;
    out.message = has_artificial ? "degenerate basis" : "";
    out.kind = Outcome::DualOptimal;
  }
};

}  // namespace detail

/// Maximize cost^T x over poly. Infeasible and unbounded problems are
/// detected exactly; an Infeasible result carries a small Farkas certificate
/// row set.
inline LpResult lp_solve(const Vector& cost, const HPolytope& poly) {
  LpResult res;
  const int n = poly.dim();
  if (cost.size() != n) throw std::invalid_argument("lp_solve: dimension mismatch");
  if (!cost.allFinite()) throw std::invalid_argument("lp_solve: non-finite cost");
  const int m = static_cast<int>(poly.rows());
  if (m == 0) {
    if (cost.norm() == 0.0) {
      res.status = LpStatus::Optimal;
      res.x = Vector::Zero(n);
      res.value = 0.0;
      res.dual = Vector(0);
    } else {
      res.status = LpStatus::Unbounded;
    }
    return res;
  }

  detail::DualSimplex solver(poly.C, poly.b);
  auto out = solver.run(cost);
  switch (out.kind) {
    case detail::DualSimplex::Outcome::DualOptimal: {
      // Validate the recovered maximizer; a degenerate optimal basis can
      // produce a stale point even though the value is correct.
      const double scale =
          1.0 + poly.b.cwiseAbs().maxCoeff() + std::abs(out.value) + out.x.cwiseAbs().maxCoeff();
      if (poly.max_violation(out.x) <= 1e-7 * scale &&
          std::abs(cost.dot(out.x) - out.value) <= 1e-7 * scale) {
        res.status = LpStatus::Optimal;
        res.x = out.x;
        res.value = out.value;
        res.dual = out.y;
        return res;
      }
      // Deterministic perturbation retry: resolve with a slightly rotated
      // cost, then check the point against the original problem.
      Vector c2 = cost;
      const double eps = 1e-9 * (1.0 + cost.cwiseAbs().maxCoeff());
      for (int i = 0; i < n; ++i) c2(i) += eps * std::cos(1.0 + i);
      auto out2 = solver.run(c2);
      if (out2.kind == detail::DualSimplex::Outcome::DualOptimal &&
          poly.max_violation(out2.x) <= 1e-7 * scale &&
          std::abs(cost.dot(out2.x) - out.value) <= 1e-6 * scale) {
        res.status = LpStatus::Optimal;
        res.x = out2.x;
        res.value = out.value;
        res.dual = out.y;
        res.message = "degenerate recovery";
        return res;
      }
      res.status = LpStatus::NumericalFailure;
      res.message = "primal recovery failed: " + out.message;
      return res;
    }
    case detail::DualSimplex::Outcome::DualUnbounded:
      res.status = LpStatus::Infeasible;
      res.certificate = out.ray_rows;
      return res;
    case detail::DualSimplex::Outcome::DualInfeasible: {
      // Either unbounded or infeasible; settle with the zero-cost problem.
      auto probe = solver.run(Vector::Zero(n));
      if (probe.kind == detail::DualSimplex::Outcome::DualUnbounded) {
        res.status = LpStatus::Infeasible;
        res.certificate = probe.ray_rows;
      } else if (probe.kind == detail::DualSimplex::Outcome::DualOptimal) {
        res.status = LpStatus::Unbounded;
      } else {
        res.status = LpStatus::NumericalFailure;
        res.message = "feasibility probe failed: " + probe.message;
      }
      return res;
    }
    case detail::DualSimplex::Outcome::Breakdown:
    default:
      res.status = LpStatus::NumericalFailure;
      res.message = out.message;
      return res;
  }
}

/// Support function sup_{x in poly} c.x; +inf when unbounded in that
/// direction, -inf for an empty polytope.
inline double lp_support(const Vector& c, const HPolytope& poly) {
  LpResult r = lp_solve(c, poly);
  switch (r.status) {
    case LpStatus::Optimal:
      return r.value;
    case LpStatus::Unbounded:
      return std::numeric_limits<double>::infinity();
    case LpStatus::Infeasible:
      return -std::numeric_limits<double>::infinity();
    default:
      throw std::runtime_error("lp_support: numerical failure: " + r.message);
  }
}

struct FeasiblePoint {
  Vector x;
  double margin = 0.0;  // slack of the least satisfied row (negative if none found)
};

/// Finds a point minimizing the worst row violation (capped search radius on
/// the auxiliary variable keeps the LP bounded). Empty optional when the
/// polytope is empty.
inline std::optional<FeasiblePoint> feasible_point(const HPolytope& poly) {
  const int n = poly.dim();
  const int m = static_cast<int>(poly.rows());
  if (m == 0) return FeasiblePoint{Vector::Zero(n), std::numeric_limits<double>::infinity()};
  Matrix C(m + 1, n + 1);
  C.setZero();
  Vector b(m + 1);
  for (int j = 0; j < m; ++j) {
    const double s = std::max(poly.C.row(j).norm(), 1e-300);
    C.row(j).head(n) = poly.C.row(j) / s;
    C(j, n) = -1.0;
    b(j) = poly.b(j) / s;
  }
  C(m, n) = -1.0;
  b(m) = 1.0;  // t >= -1 keeps the problem bounded
  Vector cost = Vector::Zero(n + 1);
  cost(n) = -1.0;
  LpResult r = lp_solve(cost, HPolytope(C, b));
  if (r.status != LpStatus::Optimal)
    throw std::runtime_error("feasible_point: LP failed: " + r.message);
  const double t = r.x(n);
  if (t > 1e-9) return std::nullopt;
  return FeasiblePoint{r.x.head(n), -t};
}

struct ChebyshevBall {
  Vector center;
  double radius = 0.0;
  bool bounded = true;  // false when the inradius is unbounded
};

/// Largest ball inside the polytope.
inline ChebyshevBall chebyshev_ball(const HPolytope& poly) {
  const int n = poly.dim();
  const int m = static_cast<int>(poly.rows());
  if (m == 0) return ChebyshevBall{Vector::Zero(n), std::numeric_limits<double>::infinity(), false};
  Matrix C(m + 1, n + 1);
  C.setZero();
  Vector b(m + 1);
  for (int j = 0; j < m; ++j) {
    C.row(j).head(n) = poly.C.row(j);
    C(j, n) = poly.C.row(j).norm();
    b(j) = poly.b(j);
  }
  C(m, n) = -1.0;
  b(m) = 0.0;  // r >= 0
  Vector cost = Vector::Zero(n + 1);
  cost(n) = 1.0;
  LpResult r = lp_solve(cost, HPolytope(C, b));
  if (r.status == LpStatus::Unbounded) return ChebyshevBall{Vector::Zero(n), 0.0, false};
  if (r.status == LpStatus::Infeasible) return ChebyshevBall{Vector::Zero(n), -1.0, true};
  if (r.status != LpStatus::Optimal)
    throw std::runtime_error("chebyshev_ball: LP failed: " + r.message);
  return ChebyshevBall{r.x.head(n), r.x(n), true};
}

}  // namespace campc
