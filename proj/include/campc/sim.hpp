#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "campc/controller.hpp"
#include "campc/model.hpp"
#include "campc/types.hpp"

namespace campc {

struct RunConfig {
  Variant variant = Variant::Full;
  Vector x0;
  int steps = 100;
  std::optional<HPolytope> delta_u;  // required for the approximate variant
  bool verify = false;               // run the per-step audits
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("RunConfig: steps must be >= 1");
    if ((variant == Variant::Approx) != delta_u.has_value())
      throw std::invalid_argument("RunConfig: delta_u is required exactly for the approximate variant");
    if (!x0.allFinite()) throw std::invalid_argument("RunConfig: non-finite x0");
  }
};

/// Audit of one online step: the realized minimizer trajectory must stay
/// inside every carrier set used for removal (C1), inside the full constraint
/// set (C2), and every removed row must re-certify against the source that
/// removed it (C3).
struct AuditRecord {
  bool checked = false;
  bool c1 = true;
  bool c2 = true;
  bool c3 = true;
  bool pass() const { return !checked || (c1 && c2 && c3); }
};

inline AuditRecord audit_step(const MpcProblem& p, const OfflineData& off, const Vector& x,
                              const StepResult& step, double tol = 1e-7) {
  AuditRecord rec;
  if (step.sol.status != QpStatus::Optimal) return rec;
  rec.checked = true;
  const int n = p.state_dim();
  const Vector X = p.Phi * x + p.Gamma * step.sol.U;
  for (int i = 1; i <= p.N; ++i) {
    const Vector xi = X.segment((i - 1) * n, n);
    if (p.X[std::size_t(i - 1)].max_violation(xi) > tol) rec.c2 = false;  // C2
    if (i == p.N || step.fell_back_to_full) continue;

    const Vector shift = p.A_pow[std::size_t(i - 1)] * x;
    Ellipsoid fwd_carrier =
        step.used_delta
            ? Ellipsoid(off.delta_forward.fits[std::size_t(i - 1)].L,
                        off.delta_forward.fits[std::size_t(i - 1)].q + shift +
                            p.gamma_block(i) * *step.u_reference)
            : Ellipsoid(off.forward.fits[std::size_t(i - 1)].L,
                        off.forward.fits[std::size_t(i - 1)].q + shift);
    std::optional<StepSets> sets;
    if (step.J_ell) sets = step_sets(p, off, x, *step.J_ell, i);

    // C1 per carrier actually in play
    if (!fwd_carrier.contains(xi, tol)) rec.c1 = false;
    if (off.backward.sets.size() >= std::size_t(i) &&
        off.backward.sets[std::size_t(i - 1)].max_violation(xi) > tol)
      rec.c1 = false;
    if (sets && !sets->m3.contains(xi, tol)) rec.c1 = false;

    // C3 per removed row
    const auto& mask = step.idx.removed[std::size_t(i - 1)];
    const auto& Xi = p.X[std::size_t(i - 1)];
    const auto& pre = off.precomp[std::size_t(i - 1)];
    for (long j = 0; j < Xi.rows(); ++j) {
      const std::uint8_t src = mask[std::size_t(j)];
      if (src == 0) continue;
      const Vector c = Xi.C.row(j).transpose();
      bool ok = false;
      if (src == 1)
        ok = halfspace_covers_ellipsoid(c, Xi.b(j), fwd_carrier);
      else if (src == 2)
        ok = pre.bwd_removable[std::size_t(j)] != 0;
      else if (src == 3 && sets)
        ok = halfspace_covers_ellipsoid(c, Xi.b(j), sets->m3);
      if (!ok) rec.c3 = false;
    }
  }
  return rec;
}

struct StepRecord {
  int k = 0;
  Vector x;
  Vector u;
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  double solve_time_us = 0.0;  // assembly + QP
  double index_time_us = 0.0;  // set construction + removal
  long retained = 0;
  long removed_fwd = 0;
  long removed_bwd = 0;
  long removed_opt = 0;
  long total_constraints = 0;
  double qp_value = 0.0;
  bool fell_back_to_full = false;
  AuditRecord audit;
};

struct ClosedLoopTrace {
  Variant variant = Variant::Full;
  std::vector<StepRecord> steps;
  Vector final_state;
  bool completed = false;       // false when a QP failed mid-run
  int failed_at = -1;
  std::string failure;

  long audit_failures() const {
    long c = 0;
    for (const auto& s : steps)
      if (!s.audit.pass()) ++c;
    return c;
  }
};

/// Closed loop under the receding-horizon law: apply the first input block,
/// advance the plant (the plant is the model), repeat. A QP failure at k = 0
/// throws (the start state is infeasible); later failures stop the run and
/// are recorded.
inline ClosedLoopTrace simulate(const MpcProblem& p, const OfflineData& off, const RunConfig& cfg) {
  cfg.validate();
  if (cfg.variant == Variant::Approx) {
    if (!off.delta_u) throw std::invalid_argument("simulate: artifact has no input-increment fits");
  }
  ClosedLoopTrace trace;
  trace.variant = cfg.variant;
  trace.steps.reserve(std::size_t(cfg.steps));
  Controller ctrl(p, off, cfg.variant);
  Vector x = cfg.x0;
  for (int k = 0; k < cfg.steps; ++k) {
    StepResult res = ctrl.step(x);
    StepRecord rec;
    rec.k = k;
    rec.x = x;
    rec.status = res.sol.status;
    rec.iterations = res.sol.iterations;
    rec.solve_time_us = res.qp_seconds * 1e6;
    rec.index_time_us = res.index_seconds * 1e6;
    rec.fell_back_to_full = res.fell_back_to_full;
    rec.total_constraints = res.report.total_rows;
    rec.retained = res.report.total_retained;
    for (const auto& sc : res.report.steps) {
      rec.removed_fwd += sc.removed_fwd;
      rec.removed_bwd += sc.removed_bwd;
      rec.removed_opt += sc.removed_opt;
    }
    if (res.sol.status != QpStatus::Optimal) {
      trace.steps.push_back(std::move(rec));
      trace.failed_at = k;
      trace.failure = "QP not optimal at step " + std::to_string(k) +
                      (res.sol.message.empty() ? "" : ": " + res.sol.message);
      if (k == 0) throw std::runtime_error("simulate: x0 infeasible");
      trace.final_state = x;
      return trace;
    }
    rec.u = res.u;
    rec.qp_value = res.sol.value;
    if (cfg.verify) rec.audit = audit_step(p, off, x, res);
    x = p.sys.A * x + p.sys.B * res.u;  // plant equals the model
    trace.steps.push_back(std::move(rec));
  }
  trace.final_state = x;
  trace.completed = true;
  return trace;
}

struct TraceComparison {
  double max_state_dev = 0.0;
  double max_input_dev = 0.0;
  double max_value_dev = 0.0;
  bool equal = false;
};

inline TraceComparison compare_traces(const ClosedLoopTrace& a, const ClosedLoopTrace& b, double tol) {
  if (a.steps.size() != b.steps.size())
    throw std::invalid_argument("compare_traces: length mismatch");
  TraceComparison cmp;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    cmp.max_state_dev = std::max(
        cmp.max_state_dev, (a.steps[k].x - b.steps[k].x).lpNorm<Eigen::Infinity>());
    if (a.steps[k].u.size() == b.steps[k].u.size() && a.steps[k].u.size() > 0)
      cmp.max_input_dev = std::max(
          cmp.max_input_dev, (a.steps[k].u - b.steps[k].u).lpNorm<Eigen::Infinity>());
    cmp.max_value_dev = std::max(cmp.max_value_dev, std::abs(a.steps[k].qp_value - b.steps[k].qp_value));
  }
  cmp.equal = cmp.max_state_dev <= tol && cmp.max_input_dev <= tol;
  return cmp;
}

/// Worst violation of the per-step constraint set over the visited states
/// (states from k >= 1 are predicted first states and must satisfy X_1).
inline double max_constraint_violation(const MpcProblem& p, const ClosedLoopTrace& trace) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < trace.steps.size(); ++k)
    worst = std::max(worst, p.X[0].max_violation(trace.steps[k].x));
  if (!trace.steps.empty() && trace.completed)
    worst = std::max(worst, p.X[0].max_violation(trace.final_state));
  return worst;
}

}  // namespace campc
