#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "campc/lp.hpp"
#include "campc/model.hpp"
#include "campc/types.hpp"

namespace campc {

enum class QpStatus { Optimal, Infeasible, IterationLimit };

/// Where a QP row came from: a state constraint (step, row index within the
/// step set), a plain input-set row, or an input-increment row.
struct RowTag {
  enum class Kind : std::uint8_t { State, Input, InputDelta };
  Kind kind = Kind::State;
  int step = 0;   // prediction step for State rows, input block for the others
  int index = 0;  // row index within the originating set

  friend bool operator==(const RowTag&, const RowTag&) = default;
};

/// Strictly convex program  min ||G(U - q0)||^2  s.t.  M U <= d.
struct QpSpec {
  Matrix G;
  Vector q0;
  Matrix M;
  Vector d;
  std::vector<RowTag> tags;  // one per row of M (may be empty for ad-hoc problems)

  int num_vars() const { return static_cast<int>(G.cols()); }
  long num_rows() const { return M.rows(); }
};

struct QpSolution {
  QpStatus status = QpStatus::IterationLimit;
  Vector U;
  double value = 0.0;  // ||G(U - q0)||^2 at the minimizer
  Vector multipliers;  // one per row, zero off the active set
  std::vector<int> active_set;
  std::vector<int> infeasibility_certificate;
  int iterations = 0;
  std::string message;
};

/// Primal active-set method on the transformed variable z = G(U - q0), where
/// the Hessian is the identity. The working set is kept linearly independent;
/// ties in the ratio test and the drop rule go to the smallest row index, so a
/// given spec always solves identically.
inline QpSolution solve_qp(const QpSpec& spec, const std::optional<Vector>& warm_start = std::nullopt) {
  QpSolution sol;
  const int n = spec.num_vars();
  const long m = spec.num_rows();
  if (spec.G.rows() != n || spec.q0.size() != n)
    throw std::invalid_argument("solve_qp: malformed objective");
  if (m > 0 && spec.M.cols() != n) throw std::invalid_argument("solve_qp: row dimension mismatch");

  Eigen::PartialPivLU<Matrix> Glu(spec.G);
  // rows mapped to z-space and scaled to unit norm
  Matrix Az(m, n);
  Vector bz(m), row_scale(m);
  if (m > 0) {
    Az = spec.G.transpose().partialPivLu().solve(spec.M.transpose()).transpose();
    bz = spec.d - spec.M * spec.q0;
    for (long r = 0; r < m; ++r) {
      double s = Az.row(r).norm();
      if (s < 1e-300) s = 1.0;
      row_scale(r) = s;
      Az.row(r) /= s;
      bz(r) /= s;
    }
  }

  const double feas_tol = 1e-9;
  Vector z;
  if (warm_start && warm_start->size() == n && m > 0) {
    Vector zw = spec.G * (*warm_start - spec.q0);
    if ((Az * zw - bz).maxCoeff() <= feas_tol) z = std::move(zw);
  } else if (warm_start && warm_start->size() == n && m == 0) {
    z = spec.G * (*warm_start - spec.q0);
  }
  if (z.size() == 0) {
    if (m == 0) {
      z = Vector::Zero(n);
    } else {
      auto fp = feasible_point(HPolytope(Az, bz));
      if (!fp) {
        sol.status = QpStatus::Infeasible;
        // Farkas-type certificate from the phase-1 LP on the original rows
        LpResult probe = lp_solve(Vector::Zero(n), HPolytope(Az, bz));
        if (probe.status == LpStatus::Infeasible) sol.infeasibility_certificate = probe.certificate;
        return sol;
      }
      z = fp->x;
    }
  }

  std::vector<int> W;
  W.reserve(std::size_t(n));
  Matrix AwT(n, n);  // columns are working rows
  auto solve_subproblem = [&](Vector& target, Vector& lam) {
    // minimizer of ||y||^2 with the working rows tight, and its multipliers
    if (W.empty()) {
      target.setZero(n);
      lam.resize(0);
      return;
    }
    const int w = static_cast<int>(W.size());
    Eigen::HouseholderQR<Matrix> qr(AwT.leftCols(w));
    Matrix Q = qr.householderQ() * Matrix::Identity(n, w);
    Matrix R = qr.matrixQR().topLeftCorner(w, w).triangularView<Eigen::Upper>();
    Vector bw(w);
    for (int k = 0; k < w; ++k) bw(k) = bz(W[std::size_t(k)]);
    target = Q * R.transpose().triangularView<Eigen::Lower>().solve(bw);
    lam = -2.0 * Matrix(R).triangularView<Eigen::Upper>().solve(Q.transpose() * target);
  };

  const int max_iters = 100 + 20 * n + static_cast<int>(m) / 8;
  Vector target(n), lam;
  for (int iter = 1; iter <= max_iters; ++iter) {
    sol.iterations = iter;
    solve_subproblem(target, lam);
    const Vector p = target - z;
    if (p.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      // stationary on the working set; check the multipliers
      int drop = -1;
      for (std::size_t k = 0; k < W.size(); ++k)
        if (lam(Eigen::Index(k)) < -1e-9 && (drop < 0 || W[k] < W[std::size_t(drop)]))
          drop = static_cast<int>(k);
      if (drop < 0) {
        sol.status = QpStatus::Optimal;
        break;
      }
      for (std::size_t k = std::size_t(drop); k + 1 < W.size(); ++k) {
        W[k] = W[k + 1];
        AwT.col(Eigen::Index(k)) = AwT.col(Eigen::Index(k + 1));
      }
      W.pop_back();
      continue;
    }
    // ratio test toward the subproblem minimizer
    double alpha = 1.0;
    int block = -1;
    if (m > 0) {
      const Vector Ap = Az * p;
      for (long r = 0; r < m; ++r) {
        if (Ap(r) > 1e-12) {
          const double res = std::max(bz(r) - Az.row(r).dot(z), 0.0);
          const double a = res / Ap(r);
          if (a < alpha - 1e-12 || (a <= alpha + 1e-12 && block >= 0 && r < block && a < 1.0)) {
            alpha = std::min(a, alpha);
            block = static_cast<int>(r);
          }
        }
      }
    }
    z += alpha * p;
    if (block >= 0 && alpha < 1.0) {
      if (std::find(W.begin(), W.end(), block) != W.end()) {
        sol.status = QpStatus::IterationLimit;
        sol.message = "blocking row already in working set";
        break;
      }
      // reject rows that would make the working set dependent
      Vector a = Az.row(block).transpose();
      if (!W.empty()) {
        const int w = static_cast<int>(W.size());
        Eigen::HouseholderQR<Matrix> qr(AwT.leftCols(w));
        Matrix Q = qr.householderQ() * Matrix::Identity(n, w);
        if ((a - Q * (Q.transpose() * a)).norm() <= 1e-10) {
          sol.status = QpStatus::IterationLimit;
          sol.message = "degenerate blocking row";
          break;
        }
      }
      AwT.col(Eigen::Index(W.size())) = a;
      W.push_back(block);
    }
  }
  if (sol.status != QpStatus::Optimal && sol.message.empty()) {
    sol.status = QpStatus::IterationLimit;
    sol.message = "iteration limit reached";
  }

  sol.U = spec.q0 + Glu.solve(z);
  sol.value = z.squaredNorm();
  sol.multipliers = Vector::Zero(m);
  solve_subproblem(target, lam);
  for (std::size_t k = 0; k < W.size(); ++k) {
    const int r = W[k];
    sol.multipliers(r) = std::max(lam(Eigen::Index(k)), 0.0) / row_scale(r);
    sol.active_set.push_back(r);
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

/// Stationarity, primal/dual feasibility and complementarity of a reported
/// minimizer, checked from the spec alone.
inline bool kkt_verify(const QpSpec& spec, const QpSolution& sol, double tol) {
  if (sol.status != QpStatus::Optimal) return false;
  const Vector grad = 2.0 * spec.G.transpose() * (spec.G * (sol.U - spec.q0));
  Vector station = grad;
  if (spec.num_rows() > 0) station += spec.M.transpose() * sol.multipliers;
  if (station.lpNorm<Eigen::Infinity>() > tol) return false;
  if (spec.num_rows() == 0) return true;
  if (sol.multipliers.minCoeff() < -tol) return false;
  const Vector resid = spec.M * sol.U - spec.d;
  if (resid.maxCoeff() > tol) return false;
  return std::abs(sol.multipliers.dot(resid)) <= tol * (1.0 + sol.multipliers.cwiseAbs().sum());
}

/// Index sets of the reduced program: per step, the retained row indices of
/// the step's constraint set. The terminal step always retains everything.
struct IndexSets {
  int N = 0;
  std::vector<std::vector<int>> retained;          // size N
  std::vector<std::vector<std::uint8_t>> removed;  // size N; 0 kept, 1/2/3 removal source

  static IndexSets all_retained(const MpcProblem& p) {
    IndexSets s;
    s.N = p.N;
    s.retained.resize(std::size_t(p.N));
    s.removed.resize(std::size_t(p.N));
    for (int i = 1; i <= p.N; ++i) {
      const long rows = p.X[std::size_t(i - 1)].rows();
      s.retained[std::size_t(i - 1)].resize(std::size_t(rows));
      for (long j = 0; j < rows; ++j) s.retained[std::size_t(i - 1)][std::size_t(j)] = int(j);
      s.removed[std::size_t(i - 1)].assign(std::size_t(rows), 0);
    }
    return s;
  }
};

/// Assembles the reduced program at state x: one row per retained state
/// constraint (mapped through the prediction), all input rows, and optionally
/// the input-increment rows |u_t - u_ref_t| constrained to delta_u.
inline QpSpec assemble_reduced_qp(const MpcProblem& p, const Vector& x, const IndexSets& idx,
                                  const HPolytope* delta_u = nullptr,
                                  const Vector* u_ref = nullptr) {
  if (!x.allFinite()) throw std::invalid_argument("assemble_reduced_qp: non-finite state");
  const int n = p.state_dim(), m = p.input_dim(), Nm = p.horizon_inputs();
  long rows = 0;
  for (int i = 0; i < p.N; ++i) rows += long(idx.retained[std::size_t(i)].size());
  rows += p.N * p.U.rows();
  if (delta_u) rows += p.N * delta_u->rows();

  QpSpec spec;
  spec.G = p.G;
  spec.q0 = p.Kq * x;
  spec.M = Matrix::Zero(rows, Nm);
  spec.d = Vector(rows);
  spec.tags.reserve(std::size_t(rows));
  long r = 0;
  for (int i = 1; i <= p.N; ++i) {
    const Vector s = p.A_pow[std::size_t(i - 1)] * x;
    const auto& Xi = p.X[std::size_t(i - 1)];
    const auto& mapped = p.mapped_rows[std::size_t(i - 1)];
    for (int j : idx.retained[std::size_t(i - 1)]) {
      spec.M.row(r) = mapped.row(j);
      spec.d(r) = Xi.b(j) - Xi.C.row(j).dot(s);
      spec.tags.push_back({RowTag::Kind::State, i, j});
      ++r;
    }
  }
  for (int t = 0; t < p.N; ++t)
    for (long j = 0; j < p.U.rows(); ++j) {
      spec.M.block(r, t * m, 1, m) = p.U.C.row(j);
      spec.d(r) = p.U.b(j);
      spec.tags.push_back({RowTag::Kind::Input, t, int(j)});
      ++r;
    }
  if (delta_u) {
    if (!u_ref || u_ref->size() != Nm)
      throw std::invalid_argument("assemble_reduced_qp: delta rows need a reference sequence");
    for (int t = 0; t < p.N; ++t)
      for (long j = 0; j < delta_u->rows(); ++j) {
        spec.M.block(r, t * m, 1, m) = delta_u->C.row(j);
        spec.d(r) = delta_u->b(j) + delta_u->C.row(j).dot(u_ref->segment(t * m, m));
        spec.tags.push_back({RowTag::Kind::InputDelta, t, int(j)});
        ++r;
      }
  }
  return spec;
}

}  // namespace campc
