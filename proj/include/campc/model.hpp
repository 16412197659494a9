#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "campc/geometry.hpp"
#include "campc/lp.hpp"
#include "campc/types.hpp"

namespace campc {

struct LtiSystem {
  Matrix A;
  Matrix B;

  LtiSystem() = default;
  LtiSystem(Matrix A_in, Matrix B_in) : A(std::move(A_in)), B(std::move(B_in)) {
    if (A.rows() != A.cols()) throw std::invalid_argument("LtiSystem: A must be square");
    if (B.rows() != A.rows()) throw std::invalid_argument("LtiSystem: B row count mismatch");
    if (!A.allFinite() || !B.allFinite()) throw std::invalid_argument("LtiSystem: non-finite data");
  }

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
};

/// Stage cost x'Qx + u'Ru with terminal cost x'Px. Q and P must be PSD, R PD.
struct CostWeights {
  Matrix Q, P, R;

  CostWeights() = default;
  CostWeights(Matrix Q_in, Matrix P_in, Matrix R_in)
      : Q(std::move(Q_in)), P(std::move(P_in)), R(std::move(R_in)) {
    auto check = [](const Matrix& M, const char* name, double min_ev) {
      if (M.rows() != M.cols()) throw std::invalid_argument(std::string(name) + " must be square");
      if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(std::string(name) + " must be symmetric");
      Eigen::SelfAdjointEigenSolver<Matrix> es(M);
      if (es.eigenvalues().minCoeff() < min_ev)
        throw std::invalid_argument(std::string(name) + " violates its eigenvalue condition");
    };
    check(Q, "Q", -1e-10);
    check(P, "P", -1e-10);
    check(R, "R", 1e-12);
  }
};

struct TerminalLaw {
  Matrix K;  // u = K x
};

/// Stacked prediction maps X = Phi x + Gamma U over the horizon.
inline std::pair<Matrix, Matrix> build_prediction(const LtiSystem& sys, int N) {
  if (N < 1) throw std::invalid_argument("build_prediction: N must be >= 1");
  const int n = sys.state_dim(), m = sys.input_dim();
  Matrix Phi(N * n, n);
  Matrix Gamma = Matrix::Zero(N * n, N * m);
  Matrix Ai = Matrix::Identity(n, n);
  std::vector<Matrix> AB(std::size_t(N));  // A^k B
  AB[0] = sys.B;
  for (int k = 1; k < N; ++k) AB[std::size_t(k)] = sys.A * AB[std::size_t(k - 1)];
  for (int i = 1; i <= N; ++i) {
    Ai = sys.A * Ai;
    Phi.middleRows((i - 1) * n, n) = Ai;
    for (int j = 0; j < i; ++j)
      Gamma.block((i - 1) * n, j * m, n, m) = AB[std::size_t(i - 1 - j)];
  }
  return {Phi, Gamma};
}

/// Open-loop simulation of the stacked input sequence; oracle counterpart of
/// the prediction matrices.
inline Vector simulate_lti(const LtiSystem& sys, const Vector& x0, const Vector& U) {
  const int n = sys.state_dim(), m = sys.input_dim();
  const int N = static_cast<int>(U.size()) / m;
  Vector X(N * n);
  Vector x = x0;
  for (int i = 0; i < N; ++i) {
    x = sys.A * x + sys.B * U.segment(i * m, m);
    X.segment(i * n, n) = x;
  }
  return X;
}

/// Factorizes the condensed quadratic cost as ||G(U - Kq x)||^2 plus a
/// state-only offset (never materialized; it cannot move the minimizer).
/// The terminal block of the stacked state weight carries P, the others Q.
inline std::pair<Matrix, Matrix> condense_cost(const LtiSystem& sys, const CostWeights& w,
                                               const Matrix& Phi, const Matrix& Gamma) {
  const int n = sys.state_dim(), m = sys.input_dim();
  const int N = static_cast<int>(Phi.rows()) / n;
  Matrix Qbar = Matrix::Zero(N * n, N * n);
  for (int i = 0; i < N; ++i) Qbar.block(i * n, i * n, n, n) = (i == N - 1) ? w.P : w.Q;
  Matrix H = Gamma.transpose() * Qbar * Gamma;
  for (int i = 0; i < N; ++i) H.block(i * m, i * m, m, m) += w.R;
  H = 0.5 * (H + H.transpose());
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("condense_cost: Hessian not positive definite (R must be PD)");
  Matrix G = Matrix(llt.matrixU());
  Matrix Kq = -llt.solve(Gamma.transpose() * (Qbar * Phi));
  return {G, Kq};
}

namespace detail {

using Poly2 = std::vector<Eigen::Vector2d>;

inline Poly2 clip_polygon(const Poly2& poly, const Eigen::Vector2d& c, double b) {
  if (poly.empty()) return poly;
  Poly2 out;
  out.reserve(poly.size() + 2);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = poly[i];
    const Eigen::Vector2d& q = poly[(i + 1) % n];
    const double fp = c.dot(p) - b;
    const double fq = c.dot(q) - b;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fq < 0.0 && fp > 0.0)) {
      const double t = fp / (fp - fq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

inline double polygon_support(const Poly2& poly, const Eigen::Vector2d& c) {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& v : poly) s = std::max(s, c.dot(v));
  return s;
}

}  // namespace detail

/// Maximal positively invariant subset of X1 under the closed loop
/// x+ = (A + B K_T) x. Iterates X <- X intersect {x : x stays in X after one
/// step}, pruning as it goes; the LP invariance certificate on the result
/// gates acceptance, not the iteration cap.
inline HPolytope build_terminal_set(const LtiSystem& sys, const Matrix& K_T, const HPolytope& X1,
                                    int max_iters = 2000) {
  const int n = sys.state_dim();
  if (K_T.rows() != sys.input_dim() || K_T.cols() != n)
    throw std::invalid_argument("build_terminal_set: K_T dimension mismatch");
  if (X1.dim() != n) throw std::invalid_argument("build_terminal_set: X1 dimension mismatch");
  const Matrix Acl = sys.A + sys.B * K_T;

  std::vector<Vector> rows;
  std::vector<double> offs;
  for (long j = 0; j < X1.rows(); ++j) {
    rows.push_back(X1.C.row(j).transpose());
    offs.push_back(X1.b(j));
  }
  auto pack = [&]() {
    Matrix C(rows.size(), n);
    Vector b(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      C.row(Eigen::Index(k)) = rows[k].transpose();
      b(Eigen::Index(k)) = offs[k];
    }
    return HPolytope(std::move(C), std::move(b));
  };

  bool determined = false;
  if (n == 2) {
    // polygon cache keeps the per-candidate support test O(vertices)
    const double kBox = 1e6;
    detail::Poly2 poly{{-kBox, -kBox}, {kBox, -kBox}, {kBox, kBox}, {-kBox, kBox}};
    for (std::size_t k = 0; k < rows.size(); ++k)
      poly = detail::clip_polygon(poly, rows[k].head<2>(), offs[k]);
    if (poly.size() < 3) throw std::runtime_error("build_terminal_set: X1 is empty or flat");
    Matrix Ak = Acl;
    for (int iter = 1; iter <= max_iters && !determined; ++iter) {
      const Matrix CAk = X1.C * Ak;
      bool added = false;
      for (long j = 0; j < X1.rows(); ++j) {
        const Eigen::Vector2d cj = CAk.row(j).transpose();
        const double sup = detail::polygon_support(poly, cj);
        if (sup > X1.b(j) + 1e-9 * (1.0 + std::abs(X1.b(j)))) {
          poly = detail::clip_polygon(poly, cj, X1.b(j));
          if (poly.size() < 3)
            throw std::runtime_error("build_terminal_set: invariant set collapsed");
          rows.push_back(cj);
          offs.push_back(X1.b(j));
          added = true;
        }
      }
      // an unbounded iterate cannot be declared determined yet
      bool touches_box = false;
      for (const auto& v : poly) touches_box |= v.cwiseAbs().maxCoeff() > 0.5 * kBox;
      determined = !added && !touches_box;
      Ak = Ak * Acl;
    }
    if (determined) {
      // keep rows supporting the polygon, then certify exactly
      std::vector<Vector> tight_rows;
      std::vector<double> tight_offs;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const double sup = detail::polygon_support(poly, rows[k].head<2>());
        if (sup >= offs[k] - 1e-7 * (1.0 + std::abs(offs[k]))) {
          tight_rows.push_back(rows[k]);
          tight_offs.push_back(offs[k]);
        }
      }
      rows.swap(tight_rows);
      offs.swap(tight_offs);
    }
  } else {
    Matrix Ak = Acl;
    for (int iter = 1; iter <= max_iters && !determined; ++iter) {
      const Matrix CAk = X1.C * Ak;
      HPolytope cur = pack();
      bool added = false;
      for (long j = 0; j < X1.rows(); ++j) {
        const Vector cj = CAk.row(j).transpose();
        const double sup = lp_support(cj, cur);
        if (!(sup <= X1.b(j) + 1e-9 * (1.0 + std::abs(X1.b(j))))) {
          rows.push_back(cj);
          offs.push_back(X1.b(j));
          added = true;
          cur = pack();
        }
      }
      determined = !added;
      Ak = Ak * Acl;
    }
  }

  HPolytope result = remove_redundant_rows(pack());
  // invariance certificate, one LP per facet
  for (long j = 0; j < result.rows(); ++j) {
    const Vector cj = (result.C.row(j) * Acl).transpose();
    const double sup = lp_support(cj, result);
    if (!(sup <= result.b(j) + 1e-7 * (1.0 + std::abs(result.b(j)))))
      throw std::runtime_error(determined
                                   ? "build_terminal_set: invariance certificate failed"
                                   : "build_terminal_set: not determined after max_iters and "
                                     "certificate failed");
  }
  return result;
}

/// Full problem data for the condensed receding-horizon program, with the
/// derived quantities the online stage needs precomputed once.
struct MpcProblem {
  LtiSystem sys;
  int N = 0;
  std::vector<HPolytope> X;  // X[i-1] constrains the i-th predicted state; X[N-1] is terminal
  HPolytope U;
  CostWeights weights;
  Matrix Phi, Gamma, G, Kq;
  std::optional<TerminalLaw> terminal_law;

  // derived caches
  Matrix Hinv;                      // (G^T G)^{-1}
  std::vector<Matrix> A_pow;        // A^1 .. A^N
  std::vector<Matrix> mapped_rows;  // per step: X[i].C * Gamma block row i
  std::vector<Matrix> opt_dir;      // per step: Gamma_i * Hinv * Gamma_i^T

  int state_dim() const { return sys.state_dim(); }
  int input_dim() const { return sys.input_dim(); }
  int horizon_inputs() const { return N * sys.input_dim(); }

  Matrix gamma_block(int i) const {  // i in [1, N]
    return Gamma.middleRows((i - 1) * sys.state_dim(), sys.state_dim());
  }

  long total_state_rows() const {
    long t = 0;
    for (const auto& Xi : X) t += Xi.rows();
    return t;
  }
};

inline MpcProblem make_problem(LtiSystem sys, int N, std::vector<HPolytope> X, HPolytope U,
                               CostWeights weights,
                               std::optional<TerminalLaw> terminal_law = std::nullopt) {
  if (static_cast<int>(X.size()) != N) throw std::invalid_argument("make_problem: need N constraint sets");
  MpcProblem p;
  p.sys = std::move(sys);
  p.N = N;
  p.X = std::move(X);
  p.U = std::move(U);
  p.weights = std::move(weights);
  p.terminal_law = std::move(terminal_law);
  std::tie(p.Phi, p.Gamma) = build_prediction(p.sys, N);
  std::tie(p.G, p.Kq) = condense_cost(p.sys, p.weights, p.Phi, p.Gamma);
  const Matrix H = p.G.transpose() * p.G;
  p.Hinv = H.llt().solve(Matrix::Identity(H.rows(), H.cols()));
  const int n = p.sys.state_dim();
  p.A_pow.resize(std::size_t(N));
  Matrix Ai = Matrix::Identity(n, n);
  for (int i = 1; i <= N; ++i) {
    Ai = p.sys.A * Ai;
    p.A_pow[std::size_t(i - 1)] = Ai;
  }
  p.mapped_rows.resize(std::size_t(N));
  p.opt_dir.resize(std::size_t(N));
  for (int i = 1; i <= N; ++i) {
    const Matrix Gi = p.gamma_block(i);
    p.mapped_rows[std::size_t(i - 1)] = p.X[std::size_t(i - 1)].C * Gi;
    p.opt_dir[std::size_t(i - 1)] = Gi * p.Hinv * Gi.transpose();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Double-integrator benchmark
// ---------------------------------------------------------------------------

struct BenchmarkGeometry {
  Matrix P1{{0.14, 0.17}, {0.17, 0.97}};
  Matrix P2{{0.20, 0.05}, {0.05, 0.21}};
  Vector d{{2.15, 0.0}};
  Vector start{{-4.0, -0.4}};
};

namespace detail {

inline Matrix sym_inv_sqrt(const Matrix& P) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Tangent rows of one ellipse (x-d)'P(x-d) <= 1, with the tangency points
/// spread uniformly in angle over the arcs where (a) the point lies strictly
/// inside the other ellipse, so the row supports the intersection and stays
/// non-redundant, and (b) the row keeps a safety margin along the segment
/// from the origin to the benchmark start state, so the regulation task
/// remains feasible. Offsets are computed as c.v, making each row tight at
/// its generating point by construction.
inline void ellipse_tangents(const BenchmarkGeometry& g, const Matrix& P, const Matrix& Pother,
                             int n_v, std::vector<Vector>& out_rows, std::vector<double>& out_offs,
                             std::vector<Vector>* out_points = nullptr) {
  constexpr int kGrid = 8192;
  constexpr double kMarginOther = 1e-3;
  constexpr double kMarginSegment = 0.25;
  const Matrix Msq = sym_inv_sqrt(P);
  std::vector<int> valid;
  valid.reserve(kGrid);
  std::vector<Vector> vs(kGrid);
  for (int k = 0; k < kGrid; ++k) {
    const double th = (k + 0.5) / kGrid * 2.0 * M_PI;
    Vector w = Msq * Vector{{std::cos(th), std::sin(th)}};
    vs[std::size_t(k)] = g.d + w;
    if (w.dot(Pother * w) > 1.0 - kMarginOther) continue;
    const Vector c = P * w;
    const double b = c.dot(vs[std::size_t(k)]);
    const double nrm = c.norm();
    bool ok = true;
    for (int s = 0; s <= 32 && ok; ++s) {
      const Vector p = (s / 32.0) * g.start;
      ok = (b - c.dot(p)) / nrm >= kMarginSegment;
    }
    if (ok) valid.push_back(k);
  }
  if (static_cast<int>(valid.size()) < n_v)
    throw std::runtime_error("ellipse_tangents: valid arc too short for requested n_v");
  for (int t = 0; t < n_v; ++t) {
    const int pick = valid[std::size_t(
        std::lround((t + 0.5) / double(n_v) * double(valid.size()) - 0.5))];
    const Vector& v = vs[std::size_t(pick)];
    const Vector c = P * (v - g.d);
    out_rows.push_back(c);
    out_offs.push_back(c.dot(v));
    if (out_points) out_points->push_back(v);
  }
}

}  // namespace detail

/// Per-step constraint polytope of the benchmark: 2 n_v halfplanes tangent to
/// the two ellipses.
inline HPolytope build_benchmark_constraints(int n_v, std::vector<Vector>* tangency_points = nullptr) {
  if (n_v < 3) throw std::invalid_argument("build_benchmark_constraints: n_v must be >= 3");
  BenchmarkGeometry g;
  std::vector<Vector> rows;
  std::vector<double> offs;
  detail::ellipse_tangents(g, g.P1, g.P2, n_v, rows, offs, tangency_points);
  detail::ellipse_tangents(g, g.P2, g.P1, n_v, rows, offs, tangency_points);
  Matrix C(2 * n_v, 2);
  Vector b(2 * n_v);
  for (int j = 0; j < 2 * n_v; ++j) {
    C.row(j) = rows[std::size_t(j)].transpose();
    b(j) = offs[std::size_t(j)];
  }
  return HPolytope(std::move(C), std::move(b));
}

/// Double-integrator regulation benchmark: 2 n_v tangent rows per step,
/// |u| <= 1, unit state weights, and a terminal set invariant under the
/// fixed feedback u = -[0.01 0.01] x.
inline MpcProblem build_double_integrator(int n_v, int N) {
  if (n_v < 3) throw std::invalid_argument("build_double_integrator: n_v must be >= 3");
  if (N < 1) throw std::invalid_argument("build_double_integrator: N must be >= 1");
  LtiSystem sys(Matrix{{1.0, 0.1}, {0.0, 1.0}}, Matrix{{0.005}, {0.1}});
  const Matrix K_T{{-0.01, -0.01}};
  HPolytope X1 = build_benchmark_constraints(n_v);
  HPolytope XN = build_terminal_set(sys, K_T, X1, 2000);
  std::vector<HPolytope> X(std::size_t(N - 1), X1);
  X.push_back(std::move(XN));
  CostWeights w(Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(1, 1));
  return make_problem(std::move(sys), N, std::move(X), HPolytope::box(Vector::Ones(1)), std::move(w),
                      TerminalLaw{K_T});
}

}  // namespace campc
