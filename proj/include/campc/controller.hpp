#pragma once

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "campc/geometry.hpp"
#include "campc/model.hpp"
#include "campc/qp.hpp"
#include "campc/reach.hpp"
#include "campc/types.hpp"

namespace campc {

/// Per-step removal accounting. A row removed by several tests is attributed
/// to the first one in source order (forward, backward, optimality), so the
/// per-source counts add up to the removed total.
struct RemovalReport {
  struct StepCounts {
    int total = 0;
    int retained = 0;
    int removed_fwd = 0;
    int removed_bwd = 0;
    int removed_opt = 0;
  };
  std::vector<StepCounts> steps;
  long total_rows = 0;
  long total_retained = 0;

  double retained_fraction() const {
    return total_rows == 0 ? 1.0 : double(total_retained) / double(total_rows);
  }
};

/// State-independent per-step scalars for the online tests: row norms against
/// the reachability fits and against the optimality-image shape, plus the
/// offline-decided backward removability flags (the backward sets do not
/// depend on the state, so that decision is a fixed LP certificate per row).
struct OfflineStepPrecomp {
  Vector fwd_norm;    // ||c_j L_{i,1}^{-1}||
  Vector fwd_thresh;  // b_j - c_j . q_{i,1}
  Vector opt_quad;    // c_j Gamma_i (G^T G)^{-1} Gamma_i^T c_j^T
  Vector row_sqnorm;  // ||c_j||^2
  std::vector<std::uint8_t> bwd_removable;
  double opt_top = 0.0;  // max eigenvalue of the optimality image shape
  // input-increment variant of the forward data (approximate mode)
  Vector dfwd_norm, dfwd_thresh;
};

struct OfflineData {
  int N = 0;
  std::uint64_t problem_checksum = 0;
  ForwardReachOffline forward;
  BackwardReachOffline backward;
  std::vector<OfflineStepPrecomp> precomp;  // steps 1..N-1
  std::optional<HPolytope> delta_u;
  ForwardReachOffline delta_forward;  // populated when delta_u is set
};

namespace detail {

inline Vector row_norms_against(const Ellipsoid& e, const Matrix& C) {
  // ||c_j L^{-1}|| for all rows at once
  Matrix Y = e.L.transpose().partialPivLu().solve(C.transpose());
  return Y.colwise().norm().transpose();
}

}  // namespace detail

/// All offline artifacts the online stage needs. The backward removability of
/// each row is settled here with an exact support LP over the backward
/// polytope; a small safety margin keeps the decision on the safe side of LP
/// tolerance.
inline OfflineData build_offline(const MpcProblem& p, std::optional<HPolytope> delta_u = std::nullopt,
                                 std::uint64_t problem_checksum = 0) {
  OfflineData off;
  off.N = p.N;
  off.problem_checksum = problem_checksum;
  off.forward = fit_forward(forward_reach(p.sys, input_zonotope(p.U), p.N));
  if (p.N > 1)
    off.backward = fit_backward(backward_reach(p.sys, p.U, p.X[std::size_t(p.N - 1)], p.N));
  if (delta_u) {
    off.delta_u = delta_u;
    off.delta_forward = fit_forward(forward_reach(p.sys, input_zonotope(*delta_u), p.N));
  }
  off.precomp.resize(std::size_t(std::max(p.N - 1, 0)));
  for (int i = 1; i < p.N; ++i) {
    auto& pre = off.precomp[std::size_t(i - 1)];
    const auto& Xi = p.X[std::size_t(i - 1)];
    const Ellipsoid& e1 = off.forward.fits[std::size_t(i - 1)];
    pre.fwd_norm = detail::row_norms_against(e1, Xi.C);
    pre.fwd_thresh = Xi.b - Xi.C * e1.q;
    pre.opt_quad.resize(Xi.rows());
    const Matrix& T = p.opt_dir[std::size_t(i - 1)];
    for (long j = 0; j < Xi.rows(); ++j)
      pre.opt_quad(j) = Xi.C.row(j) * T * Xi.C.row(j).transpose();
    pre.row_sqnorm = Xi.C.rowwise().squaredNorm();
    pre.opt_top = Eigen::SelfAdjointEigenSolver<Matrix>(T).eigenvalues().maxCoeff();
    pre.bwd_removable.assign(std::size_t(Xi.rows()), 0);
    const HPolytope& back = off.backward.sets[std::size_t(i - 1)];
    for (long j = 0; j < Xi.rows(); ++j) {
      const double sup = lp_support(Xi.C.row(j).transpose(), back);
      if (sup <= Xi.b(j) - 1e-9 * (1.0 + std::abs(Xi.b(j))))
        pre.bwd_removable[std::size_t(j)] = 1;
    }
    if (delta_u) {
      const Ellipsoid& ed = off.delta_forward.fits[std::size_t(i - 1)];
      pre.dfwd_norm = detail::row_norms_against(ed, Xi.C);
      pre.dfwd_thresh = Xi.b - Xi.C * ed.q;
    }
  }
  return off;
}

/// Every minimizer of the condensed cost over any convex feasible set that
/// contains the given feasible sequence lies in this ellipsoid: center
/// halfway between the sequence and the unconstrained minimizer q(x), radius
/// half their G-distance. A vanishing radius is inflated so the set stays a
/// valid (tiny) ellipsoid.
inline Ellipsoid optimality_ellipsoid(const MpcProblem& p, const Vector& x, const Vector& U_tilde) {
  const Vector q0 = p.Kq * x;
  const double r = 0.5 * (p.G * (U_tilde - q0)).norm();
  const double eps = 1e-9 * (1.0 + (p.G * q0).norm() + (p.G * U_tilde).norm());
  const double r_eff = std::max(r, eps);
  return Ellipsoid(p.G / r_eff, 0.5 * (U_tilde + q0));
}

struct StepSets {
  Ellipsoid m1;  // forward fit shifted by the free response
  Ellipsoid m2;  // inner backward fit (certificate carrier; removal uses the exact polytope)
  Ellipsoid m3;  // optimality image in state space
  bool m3_regularized = false;
};

namespace detail {

inline double opt_image_min_axis(double r_eff, double opt_top, const Vector& center) {
  return 1e-9 * std::max({1.0, r_eff * std::sqrt(std::max(opt_top, 0.0)),
                          center.cwiseAbs().maxCoeff()});
}

}  // namespace detail

/// The three per-step sets bounding the reduced problem's optimal state at
/// step i (1..N-1).
inline StepSets step_sets(const MpcProblem& p, const OfflineData& off, const Vector& x,
                          const Ellipsoid& J_ell, int i) {
  if (i < 1 || i >= p.N) throw std::invalid_argument("step_sets: step out of range");
  StepSets s;
  const Vector shift = p.A_pow[std::size_t(i - 1)] * x;
  const Ellipsoid& f = off.forward.fits[std::size_t(i - 1)];
  s.m1 = Ellipsoid(f.L, f.q + shift);
  s.m2 = off.backward.fits[std::size_t(i - 1)];
  // image of the optimality ellipsoid under the block prediction row
  const Matrix Gi = p.gamma_block(i);
  const Matrix Li = J_ell.L.inverse();
  const Matrix GiLi = Gi * Li;
  Matrix shape = GiLi * GiLi.transpose();
  const Vector center = Gi * J_ell.q + shift;
  Eigen::SelfAdjointEigenSolver<Matrix> es(shape);
  const double min_axis =
      1e-9 * std::max({1.0, std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0)),
                       center.cwiseAbs().maxCoeff()});
  shape.diagonal().array() += min_axis * min_axis;
  s.m3 = Ellipsoid::from_shape(shape, center, 0.0, &s.m3_regularized);
  s.m3_regularized = true;  // the diagonal inflation always applies
  return s;
}

/// Removal carriers for one step.
struct StepCarriers {
  const Ellipsoid* m1 = nullptr;                         // shifted forward fit
  const std::vector<std::uint8_t>* bwd_removable = nullptr;  // offline flags
  const Ellipsoid* m3 = nullptr;                         // optimality image
};

/// Reference removal test: row j is removed when it is not fixed and at least
/// one source certifies that its halfspace covers the whole carrier set.
/// Returns the per-row source mask (0 retained) and per-source counts.
inline std::pair<std::vector<std::uint8_t>, std::array<int, 3>> remove_for_step(
    const HPolytope& Xi, const std::vector<int>& fixed, const StepCarriers& sets) {
  std::vector<std::uint8_t> mask(std::size_t(Xi.rows()), 0);
  std::array<int, 3> counts{0, 0, 0};
  std::vector<char> is_fixed(std::size_t(Xi.rows()), 0);
  for (int f : fixed) is_fixed[std::size_t(f)] = 1;
  for (long j = 0; j < Xi.rows(); ++j) {
    if (is_fixed[std::size_t(j)]) continue;
    const Vector c = Xi.C.row(j).transpose();
    if (sets.m1 && halfspace_covers_ellipsoid(c, Xi.b(j), *sets.m1)) {
      mask[std::size_t(j)] = 1;
      ++counts[0];
    } else if (sets.bwd_removable && (*sets.bwd_removable)[std::size_t(j)]) {
      mask[std::size_t(j)] = 2;
      ++counts[1];
    } else if (sets.m3 && halfspace_covers_ellipsoid(c, Xi.b(j), *sets.m3)) {
      mask[std::size_t(j)] = 3;
      ++counts[2];
    }
  }
  return {std::move(mask), counts};
}

/// Shifted previous minimizer with the terminal law appended.
inline Vector warm_start(const MpcProblem& p, const Vector& prev_U, const Vector& prev_terminal_state,
                         const Matrix& K_T) {
  const int m = p.input_dim();
  Vector out(p.horizon_inputs());
  out.head((p.N - 1) * m) = prev_U.tail((p.N - 1) * m);
  out.tail(m) = K_T * prev_terminal_state;
  return out;
}

struct StepResult {
  Vector u;
  QpSolution sol;
  IndexSets idx;
  RemovalReport report;
  std::optional<Ellipsoid> J_ell;       // optimality ellipsoid actually used
  std::optional<Vector> u_reference;    // feasible sequence behind J_ell / the delta rows
  bool used_optimality = false;
  bool used_delta = false;         // approximate-mode tightening active
  bool fell_back_to_full = false;  // reduced problem was infeasible (not expected)
  bool warm_rejected = false;      // supplied sequence failed its feasibility check
  double index_seconds = 0.0;      // set construction + removal
  double qp_seconds = 0.0;         // assembly + solve
};

namespace detail {

inline bool sequence_feasible(const MpcProblem& p, const Vector& x, const Vector& U, double tol = 1e-9) {
  const int m = p.input_dim();
  for (int t = 0; t < p.N; ++t)
    if (p.U.rows() > 0 && (p.U.C * U.segment(t * m, m) - p.U.b).maxCoeff() > tol) return false;
  const Vector X = p.Phi * x + p.Gamma * U;
  const int n = p.state_dim();
  for (int i = 1; i <= p.N; ++i)
    if (p.X[std::size_t(i - 1)].max_violation(X.segment((i - 1) * n, n)) > tol) return false;
  return true;
}

struct RemovalContext {
  const MpcProblem* p;
  const OfflineData* off;
  bool use_delta = false;
  // optimality data (empty when no feasible sequence is available)
  bool use_opt = false;
  double r_eff = 0.0;
  Vector opt_center_u;  // (U_tilde + q0)/2
  Vector u_tilde;
};

/// Hot-path removal using the precomputed scalars; algebraically identical to
/// remove_for_step on the step_sets carriers.
inline void compute_index_sets(const RemovalContext& ctx, const Vector& x, IndexSets& idx,
                               RemovalReport& report) {
  const MpcProblem& p = *ctx.p;
  const OfflineData& off = *ctx.off;
  idx.N = p.N;
  idx.retained.assign(std::size_t(p.N), {});
  idx.removed.assign(std::size_t(p.N), {});
  report.steps.assign(std::size_t(p.N), {});
  report.total_rows = 0;
  report.total_retained = 0;
  for (int i = 1; i <= p.N; ++i) {
    const auto& Xi = p.X[std::size_t(i - 1)];
    const long rows = Xi.rows();
    auto& mask = idx.removed[std::size_t(i - 1)];
    auto& keep = idx.retained[std::size_t(i - 1)];
    mask.assign(std::size_t(rows), 0);
    auto& rc = report.steps[std::size_t(i - 1)];
    rc.total = int(rows);
    report.total_rows += rows;
    if (i == p.N) {  // terminal rows are fixed
      keep.resize(std::size_t(rows));
      for (long j = 0; j < rows; ++j) keep[std::size_t(j)] = int(j);
      rc.retained = int(rows);
      report.total_retained += rows;
      continue;
    }
    const auto& pre = off.precomp[std::size_t(i - 1)];
    const Vector shift = p.A_pow[std::size_t(i - 1)] * x;
    Vector fwd_gap;
    if (ctx.use_delta) {
      // forward bound recentred on the nominal trajectory under the reference
      // sequence; dfwd_thresh already folds b - c.q_delta
      const Vector nominal = shift + p.gamma_block(i) * ctx.u_tilde;
      fwd_gap = pre.dfwd_thresh - Xi.C * nominal;
    } else {
      fwd_gap = pre.fwd_thresh - Xi.C * shift;
    }
    const Vector* fwd_norm = ctx.use_delta ? &pre.dfwd_norm : &pre.fwd_norm;
    Vector opt_gap, opt_norm;
    double eps3 = 0.0;
    if (ctx.use_opt) {
      const Vector center = p.gamma_block(i) * ctx.opt_center_u + shift;
      eps3 = opt_image_min_axis(ctx.r_eff, pre.opt_top, center);
      opt_gap = Xi.b - Xi.C * center;
      opt_norm = (ctx.r_eff * ctx.r_eff * pre.opt_quad + eps3 * eps3 * pre.row_sqnorm).cwiseSqrt();
    }
    keep.clear();
    for (long j = 0; j < rows; ++j) {
      std::uint8_t source = 0;
      if ((*fwd_norm)(j) <= fwd_gap(j))
        source = 1;
      else if (pre.bwd_removable[std::size_t(j)])
        source = 2;
      else if (ctx.use_opt && opt_norm(j) <= opt_gap(j))
        source = 3;
      mask[std::size_t(j)] = source;
      if (source == 0)
        keep.push_back(int(j));
      else if (source == 1)
        ++rc.removed_fwd;
      else if (source == 2)
        ++rc.removed_bwd;
      else
        ++rc.removed_opt;
    }
    rc.retained = int(keep.size());
    report.total_retained += rc.retained;
  }
}

inline StepResult run_step(const MpcProblem& p, const OfflineData& off, const Vector& x,
                           const std::optional<Vector>& U_tilde, bool approx_mode) {
  using clock = std::chrono::steady_clock;
  StepResult res;
  const auto t0 = clock::now();

  RemovalContext ctx;
  ctx.p = &p;
  ctx.off = &off;
  std::optional<Vector> warm = U_tilde;
  if (U_tilde) {
    if (sequence_feasible(p, x, *U_tilde)) {
      const Vector q0 = p.Kq * x;
      ctx.use_opt = true;
      ctx.u_tilde = *U_tilde;
      ctx.opt_center_u = 0.5 * (*U_tilde + q0);
      const double r = 0.5 * (p.G * (*U_tilde - q0)).norm();
      const double eps = 1e-9 * (1.0 + (p.G * q0).norm() + (p.G * *U_tilde).norm());
      ctx.r_eff = std::max(r, eps);
      res.J_ell = Ellipsoid(p.G / ctx.r_eff, ctx.opt_center_u);
      res.u_reference = *U_tilde;
      ctx.use_delta = approx_mode && off.delta_u.has_value();
    } else {
      res.warm_rejected = true;
      warm.reset();
    }
  }
  res.used_optimality = ctx.use_opt;
  res.used_delta = ctx.use_delta;
  compute_index_sets(ctx, x, res.idx, res.report);
  const auto t1 = clock::now();

  const HPolytope* delta = res.used_delta ? &*off.delta_u : nullptr;
  const Vector* uref = res.used_delta ? &ctx.u_tilde : nullptr;
  QpSpec spec = assemble_reduced_qp(p, x, res.idx, delta, uref);
  res.sol = solve_qp(spec, warm);
  if (res.sol.status == QpStatus::Infeasible) {
    // Should never fire: removal only drops rows implied for candidate
    // minimizers. Resolve against the full row set and record the event.
    res.fell_back_to_full = true;
    IndexSets full = IndexSets::all_retained(p);
    QpSpec full_spec = assemble_reduced_qp(p, x, full, delta, uref);
    res.sol = solve_qp(full_spec, warm);
    res.idx = std::move(full);
  }
  const auto t2 = clock::now();
  res.index_seconds = std::chrono::duration<double>(t1 - t0).count();
  res.qp_seconds = std::chrono::duration<double>(t2 - t1).count();
  if (res.sol.status == QpStatus::Optimal) res.u = res.sol.U.head(p.input_dim());
  return res;
}

}  // namespace detail

/// One step of the exact scheme. Without a feasible input sequence (cold
/// start) the optimality source is skipped; removal then rests on the two
/// reachability sources, which is still exact.
inline StepResult exact_step(const MpcProblem& p, const OfflineData& off, const Vector& x,
                             const std::optional<Vector>& U_tilde = std::nullopt) {
  return detail::run_step(p, off, x, U_tilde, false);
}

/// One step of the approximate scheme: the program is augmented with
/// U in U_tilde + deltaU per block, and the forward bound is recentred on the
/// nominal trajectory under U_tilde with the smaller input set, which removes
/// more rows. Exact with respect to the augmented program.
inline StepResult approx_step(const MpcProblem& p, const OfflineData& off, const Vector& x,
                              const Vector& U_tilde, const HPolytope& delta_u) {
  if (!off.delta_u)
    throw std::invalid_argument("approx_step: offline data carries no input-increment fits");
  if (off.delta_u->C != delta_u.C || off.delta_u->b != delta_u.b)
    throw std::invalid_argument("approx_step: delta_u differs from the offline artifact");
  StepResult res = detail::run_step(p, off, x, U_tilde, true);
  if (res.warm_rejected)
    throw std::invalid_argument("approx_step: U_tilde is not feasible at x");
  return res;
}

enum class Variant { Full, Exact, Approx };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full:
      return "full";
    case Variant::Exact:
      return "exact";
    default:
      return "approx";
  }
}

/// Receding-horizon controller wrapper owning the warm-start state.
class Controller {
 public:
  Controller(const MpcProblem& p, const OfflineData& off, Variant variant)
      : p_(&p), off_(&off), variant_(variant) {
    if (variant == Variant::Approx && !off.delta_u)
      throw std::invalid_argument("Controller: approximate variant needs delta fits in the artifact");
    if ((variant != Variant::Full) && !p.terminal_law)
      throw std::invalid_argument("Controller: reduced variants need the terminal law for warm starts");
  }

  StepResult step(const Vector& x) {
    using clock = std::chrono::steady_clock;
    StepResult res;
    std::optional<Vector> u_tilde;
    if (prev_U_)
      u_tilde = warm_start(*p_, *prev_U_, prev_terminal_state_, p_->terminal_law->K);

    if (variant_ == Variant::Full) {
      const auto t0 = clock::now();
      IndexSets idx = IndexSets::all_retained(*p_);
      QpSpec spec = assemble_reduced_qp(*p_, x, idx);
      res.sol = solve_qp(spec, u_tilde);
      res.qp_seconds = std::chrono::duration<double>(clock::now() - t0).count();
      res.idx = std::move(idx);
      res.report.total_rows = p_->total_state_rows();
      res.report.total_retained = res.report.total_rows;
      if (res.sol.status == QpStatus::Optimal) res.u = res.sol.U.head(p_->input_dim());
    } else if (variant_ == Variant::Exact || !u_tilde) {
      res = exact_step(*p_, *off_, x, u_tilde);
    } else {
      res = approx_step(*p_, *off_, x, *u_tilde, *off_->delta_u);
    }

    if (res.sol.status == QpStatus::Optimal) {
      prev_U_ = res.sol.U;
      prev_terminal_state_ =
          p_->A_pow[std::size_t(p_->N - 1)] * x + p_->gamma_block(p_->N) * res.sol.U;
    } else {
      prev_U_.reset();
    }
    return res;
  }

  void reset() { prev_U_.reset(); }

 private:
  const MpcProblem* p_;
  const OfflineData* off_;
  Variant variant_;
  std::optional<Vector> prev_U_;
  Vector prev_terminal_state_;
};

}  // namespace campc
