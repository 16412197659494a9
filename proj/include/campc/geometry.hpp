#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "campc/lp.hpp"
#include "campc/types.hpp"

namespace campc {

/// sup_{x in E} c.x = c.q + ||c L^{-1}||_2.
inline double ellipsoid_support(const Vector& c, const Ellipsoid& E) {
  if (c.size() != E.dim()) throw std::invalid_argument("ellipsoid_support: dimension mismatch");
  return c.dot(E.q) + E.L.transpose().partialPivLu().solve(c).norm();
}

/// True only if E is contained in {x : c.x <= b}. Uses the signed test
/// ||c L^{-1}|| <= b - c.q, so an ellipsoid on the violating side of the
/// hyperplane is never reported as covered.
inline bool halfspace_covers_ellipsoid(const Vector& c, double b, const Ellipsoid& E) {
  if (c.size() != E.dim()) throw std::invalid_argument("halfspace_covers_ellipsoid: dimension mismatch");
  return E.L.transpose().partialPivLu().solve(c).norm() <= b - c.dot(E.q);
}

/// Image {M x + t : x in E}. Rank-deficient directions of M are inflated so
/// the result still contains the true image; *regularized reports when that
/// happened.
inline Ellipsoid affine_image_ellipsoid(const Matrix& M, const Vector& t, const Ellipsoid& E,
                                        bool* regularized = nullptr) {
  if (M.cols() != E.dim() || t.size() != M.rows())
    throw std::invalid_argument("affine_image_ellipsoid: dimension mismatch");
  Matrix Li = E.L.inverse();
  Matrix MLi = M * Li;
  Matrix shape = MLi * MLi.transpose();
  Vector center = M * E.q + t;
  Eigen::SelfAdjointEigenSolver<Matrix> es(shape);
  const double top = std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
  const double min_axis = 1e-9 * std::max({1.0, top, center.cwiseAbs().maxCoeff()});
  return Ellipsoid::from_shape(shape, center, min_axis, regularized);
}

/// Minimum-volume enclosing ellipsoid of a point set (Khachiyan iteration
/// followed by an exact containment rescale, so every input point is inside
/// the result even when the iteration stops early). Rank-deficient point sets
/// get their flat directions inflated.
inline Ellipsoid mvee(const std::vector<Vector>& points, double tol = 1e-7) {
  if (points.empty()) throw std::invalid_argument("mvee: empty point set");
  const int d = static_cast<int>(points[0].size());
  const int M = static_cast<int>(points.size());
  Matrix P(d, M);
  for (int i = 0; i < M; ++i) {
    if (points[std::size_t(i)].size() != d) throw std::invalid_argument("mvee: mixed dimensions");
    P.col(i) = points[std::size_t(i)];
  }
  double spread = 1.0;
  for (int k = 0; k < d; ++k)
    spread = std::max(spread, P.row(k).maxCoeff() - P.row(k).minCoeff());
  const double min_axis = 1e-9 * std::max(spread, P.cwiseAbs().maxCoeff());

  Matrix Q(d + 1, M);
  Q.topRows(d) = P;
  Q.bottomRows(1).setOnes();
  Vector u = Vector::Constant(M, 1.0 / M);
  const double reg = 1e-14 * (1.0 + P.squaredNorm() / M);
  for (long iter = 0; iter < 100000; ++iter) {
    Matrix X = Q * u.asDiagonal() * Q.transpose();
    X.diagonal().array() += reg;
    Eigen::LDLT<Matrix> ldlt(X);
    Matrix W = ldlt.solve(Q);
    int jmax = 0;
    double wmax = -1.0;
    for (int j = 0; j < M; ++j) {
      const double wj = Q.col(j).dot(W.col(j));
      if (wj > wmax) {
        wmax = wj;
        jmax = j;
      }
    }
    if (wmax <= (d + 1) * (1.0 + tol)) break;
    const double step = (wmax - d - 1.0) / ((d + 1.0) * (wmax - 1.0));
    u *= (1.0 - step);
    u(jmax) += step;
  }
  Vector center = P * u;
  Matrix S = P * u.asDiagonal() * P.transpose() - center * center.transpose();
  S *= double(d);
  // exact containment rescale
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  Vector ev = es.eigenvalues().cwiseMax(min_axis * min_axis);
  Matrix Sinv_half =
      es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  double r2 = 0.0;
  for (int i = 0; i < M; ++i) r2 = std::max(r2, (Sinv_half * (P.col(i) - center)).squaredNorm());
  const double r = std::sqrt(std::max(r2, 1e-30)) * (1.0 + 1e-12);
  return Ellipsoid(Sinv_half / r, center);
}

/// Removes rows implied by the remaining ones; the returned polytope is the
/// same set. When the polytope is empty, the returned rows are a small
/// infeasible subsystem (Farkas support).
inline HPolytope remove_redundant_rows(const HPolytope& poly) {
  const int n = poly.dim();
  const long m = poly.rows();
  if (m == 0) return poly;

  // Normalize, drop trivial rows, fold exact duplicates onto the tightest offset.
  std::vector<Vector> raw_rows;
  std::vector<double> raw_offs;
  raw_rows.reserve(std::size_t(m));
  for (long j = 0; j < m; ++j) {
    Vector c = poly.C.row(j).transpose();
    double b = poly.b(j);
    const double s = c.norm();
    if (s <= 1e-12) {
      if (b < -1e-12) return HPolytope(poly.C.row(j), poly.b.segment(j, 1));  // 0 <= b < 0
      continue;                                                               // always true
    }
    raw_rows.push_back(c / s);
    raw_offs.push_back(b / s);
  }
  // lexicographic sort so duplicate directions land next to each other
  std::vector<int> order(raw_rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int bb) {
    for (int i = 0; i < n; ++i) {
      const double da = raw_rows[std::size_t(a)](i), db = raw_rows[std::size_t(bb)](i);
      if (da != db) return da < db;
    }
    return raw_offs[std::size_t(a)] < raw_offs[std::size_t(bb)];
  });
  std::vector<Vector> rows;
  std::vector<double> offs;
  rows.reserve(raw_rows.size());
  for (int idx : order) {
    const Vector& c = raw_rows[std::size_t(idx)];
    const double b = raw_offs[std::size_t(idx)];
    if (!rows.empty() && (rows.back() - c).lpNorm<Eigen::Infinity>() <= 1e-12) {
      offs.back() = std::min(offs.back(), b);
      continue;
    }
    rows.push_back(c);
    offs.push_back(b);
  }
  auto pack = [&](const std::vector<int>& keep) {
    Matrix C(keep.size(), n);
    Vector b(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      C.row(Eigen::Index(i)) = rows[std::size_t(keep[i])].transpose();
      b(Eigen::Index(i)) = offs[std::size_t(keep[i])];
    }
    return HPolytope(std::move(C), std::move(b));
  };
  std::vector<int> all(rows.size());
  std::iota(all.begin(), all.end(), 0);
  if (rows.size() <= 1) return pack(all);

  HPolytope current = pack(all);
  auto fp = feasible_point(current);
  if (!fp) {
    LpResult probe = lp_solve(Vector::Zero(n), current);
    if (probe.status == LpStatus::Infeasible && !probe.certificate.empty())
      return pack(probe.certificate);
    return current;  // infeasible but no clean certificate; return as-is
  }

  const double tol = 1e-9;
  const long mm = long(rows.size());
  std::vector<char> alive(rows.size(), 1);
  auto certify_pass = [&]() {
    // Sequential LP certificate against the currently alive rows with
    // immediate removal; a kept duplicate pair resolves correctly because the
    // partner is gone by the time the second copy is tested.
    for (int j = 0; j < mm; ++j) {
      if (!alive[std::size_t(j)]) continue;
      std::vector<int> others;
      for (int l = 0; l < mm; ++l)
        if (alive[std::size_t(l)] && l != j) others.push_back(l);
      Matrix Co(others.size() + 1, n);
      Vector bo(others.size() + 1);
      for (std::size_t k = 0; k < others.size(); ++k) {
        Co.row(Eigen::Index(k)) = rows[std::size_t(others[k])].transpose();
        bo(Eigen::Index(k)) = offs[std::size_t(others[k])];
      }
      Co.row(Eigen::Index(others.size())) = rows[std::size_t(j)].transpose();
      bo(Eigen::Index(others.size())) = offs[std::size_t(j)] + 1.0;  // cap keeps the LP bounded
      LpResult r = lp_solve(rows[std::size_t(j)], HPolytope(Co, bo));
      if (r.status != LpStatus::Optimal)
        throw std::runtime_error("remove_redundant_rows: certificate LP failed: " + r.message);
      if (r.value <= offs[std::size_t(j)] + tol) alive[std::size_t(j)] = 0;
    }
  };

  ChebyshevBall ball = chebyshev_ball(current);
  if (mm > 64 && ball.bounded && ball.radius > 1e-7) {
    // Clarkson-style prefilter against a growing witness set: cheap LPs over
    // the small witness polytope, one ray shot per discovered facet.
    const Vector z = ball.center;
    std::vector<int> witness;
    std::vector<char> is_witness(rows.size(), 0);
    std::fill(alive.begin(), alive.end(), 0);
    for (int j = 0; j < mm; ++j) {
      if (is_witness[std::size_t(j)]) continue;
      for (;;) {
        Matrix Cw(witness.size() + 1, n);
        Vector bw(witness.size() + 1);
        for (std::size_t k = 0; k < witness.size(); ++k) {
          Cw.row(Eigen::Index(k)) = rows[std::size_t(witness[k])].transpose();
          bw(Eigen::Index(k)) = offs[std::size_t(witness[k])];
        }
        Cw.row(Eigen::Index(witness.size())) = rows[std::size_t(j)].transpose();
        bw(Eigen::Index(witness.size())) = offs[std::size_t(j)] + 1.0;
        LpResult r = lp_solve(rows[std::size_t(j)], HPolytope(Cw, bw));
        if (r.status != LpStatus::Optimal)
          throw std::runtime_error("remove_redundant_rows: witness LP failed: " + r.message);
        if (r.value <= offs[std::size_t(j)] + tol) break;  // redundant w.r.t. a subset: drop
        // Ray from the interior point toward the violating vertex; the first
        // hyperplane crossed is a genuine facet (redundant halfspaces cannot
        // be crossed while still inside the polytope).
        const Vector dir = r.x - z;
        int hit = -1;
        double thit = std::numeric_limits<double>::infinity();
        for (int l = 0; l < mm; ++l) {
          const double a = rows[std::size_t(l)].dot(dir);
          if (a > 1e-12) {
            const double tl = (offs[std::size_t(l)] - rows[std::size_t(l)].dot(z)) / a;
            if (tl < thit - 1e-15) {
              thit = tl;
              hit = l;
            }
          }
        }
        if (hit < 0) throw std::runtime_error("remove_redundant_rows: ray escaped");
        if (!is_witness[std::size_t(hit)]) {
          is_witness[std::size_t(hit)] = 1;
          witness.push_back(hit);
        }
        if (hit == j) break;
      }
    }
    for (int w : witness) alive[std::size_t(w)] = 1;
    // Final certification over the (small) witness set clears weakly
    // redundant rows picked up by ray ties.
    certify_pass();
  } else {
    certify_pass();
  }
  std::vector<int> keep;
  for (int j = 0; j < mm; ++j)
    if (alive[std::size_t(j)]) keep.push_back(j);
  return pack(keep);
}

/// Exact projection eliminating one variable (Fourier-Motzkin), pruned.
inline HPolytope fourier_motzkin_eliminate(const HPolytope& poly, int var_index) {
  const int n = poly.dim();
  if (var_index < 0 || var_index >= n)
    throw std::invalid_argument("fourier_motzkin_eliminate: bad variable index");
  if (n == 1) throw std::invalid_argument("fourier_motzkin_eliminate: cannot drop last variable");
  const long m = poly.rows();
  std::vector<int> pos, neg, zer;
  for (long j = 0; j < m; ++j) {
    const double a = poly.C(j, var_index);
    if (a > 1e-12)
      pos.push_back(int(j));
    else if (a < -1e-12)
      neg.push_back(int(j));
    else
      zer.push_back(int(j));
  }
  auto strip = [&](const Vector& row) {
    Vector out(n - 1);
    int k = 0;
    for (int i = 0; i < n; ++i)
      if (i != var_index) out(k++) = row(i);
    return out;
  };
  const Eigen::Index total = Eigen::Index(zer.size() + pos.size() * neg.size());
  Matrix C(total, n - 1);
  Vector b(total);
  Eigen::Index r = 0;
  for (int j : zer) {
    C.row(r) = strip(poly.C.row(j).transpose()).transpose();
    b(r) = poly.b(j);
    ++r;
  }
  for (int p : pos) {
    const double ap = poly.C(p, var_index);
    for (int q : neg) {
      const double aq = -poly.C(q, var_index);
      C.row(r) = (aq * strip(poly.C.row(p).transpose()) + ap * strip(poly.C.row(q).transpose()))
                     .transpose();
      b(r) = aq * poly.b(p) + ap * poly.b(q);
      ++r;
    }
  }
  return remove_redundant_rows(HPolytope(std::move(C), std::move(b)));
}

/// Large inscribed ellipsoid of a bounded, full-dimensional polytope.
/// Log-volume ascent (barrier on the per-row slacks) from the Chebyshev ball;
/// every iterate keeps the per-row containment condition, which is the hard
/// requirement. Throws when the polytope is empty, unbounded, or flat.
inline Ellipsoid inscribed_ellipsoid(const HPolytope& poly) {
  const int n = poly.dim();
  ChebyshevBall ball = chebyshev_ball(poly);
  if (!ball.bounded)
    throw std::runtime_error("inscribed_ellipsoid: polytope has unbounded inradius");
  if (ball.radius <= 1e-10)
    throw std::runtime_error("inscribed_ellipsoid: empty or lower-dimensional polytope (Chebyshev radius " +
                             std::to_string(ball.radius) + ")");
  // row-normalized copy
  const long m = poly.rows();
  Matrix Cn(m, n);
  Vector bn(m);
  for (long j = 0; j < m; ++j) {
    const double s = poly.C.row(j).norm();
    Cn.row(j) = poly.C.row(j) / s;
    bn(j) = poly.b(j) / s;
  }
  // check boundedness in all directions (inradius can be finite in a slab)
  for (int i = 0; i < n; ++i) {
    for (double sgn : {1.0, -1.0}) {
      Vector c = Vector::Zero(n);
      c(i) = sgn;
      if (!std::isfinite(lp_support(c, poly)))
        throw std::runtime_error("inscribed_ellipsoid: polytope unbounded");
    }
  }

  Matrix B = Matrix::Identity(n, n) * (ball.radius * 0.999);
  Vector q = ball.center;
  auto slacks = [&](const Matrix& Bm, const Vector& qv, Vector& s) {
    for (long j = 0; j < m; ++j) s(j) = bn(j) - Cn.row(j).dot(qv) - (Bm * Cn.row(j).transpose()).norm();
  };
  Vector s(m);
  slacks(B, q, s);
  double mu = 1.0;
  auto objective = [&](const Matrix& Bm, const Vector& sv) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Bm);
    if (es.eigenvalues().minCoeff() <= 0.0) return -std::numeric_limits<double>::infinity();
    double f = es.eigenvalues().array().log().sum();
    for (long j = 0; j < m; ++j) {
      if (sv(j) <= 0.0) return -std::numeric_limits<double>::infinity();
      f += mu * std::log(sv(j));
    }
    return f;
  };
  for (int stage = 0; stage < 6; ++stage) {
    for (int it = 0; it < 60; ++it) {
      Matrix gB = B.inverse();
      Vector gq = Vector::Zero(n);
      for (long j = 0; j < m; ++j) {
        const Vector cj = Cn.row(j).transpose();
        const Vector Bc = B * cj;
        const double nb = std::max(Bc.norm(), 1e-30);
        const Matrix dnorm = (cj * Bc.transpose() + Bc * cj.transpose()) / (2.0 * nb);
        gB -= (mu / s(j)) * dnorm;
        gq -= (mu / s(j)) * cj;
      }
      const double gnorm = std::sqrt(gB.squaredNorm() + gq.squaredNorm());
      if (gnorm < 1e-9) break;
      double step = 0.5 * std::min(1.0, 1.0 / gnorm) * ball.radius;
      const double f0 = objective(B, s);
      bool improved = false;
      Vector s_try(m);
      for (int ls = 0; ls < 40; ++ls) {
        Matrix Bt = B + step * gB;
        Bt = 0.5 * (Bt + Bt.transpose());
        Vector qt = q + step * gq;
        slacks(Bt, qt, s_try);
        if (s_try.minCoeff() > 0.0 && objective(Bt, s_try) > f0 + 1e-12) {
          B = Bt;
          q = qt;
          s = s_try;
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    mu *= 0.25;
  }
  // tiny safety shrink so the containment condition holds with slack
  double rho = 0.0;
  for (long j = 0; j < m; ++j) {
    const double denom = bn(j) - Cn.row(j).dot(q);
    if (denom <= 0.0) throw std::runtime_error("inscribed_ellipsoid: center left the polytope");
    rho = std::max(rho, (B * Cn.row(j).transpose()).norm() / denom);
  }
  if (rho > 1.0 - 1e-12) B *= (1.0 - 1e-11) / rho;
  return Ellipsoid(B.inverse(), q);
}

}  // namespace campc
