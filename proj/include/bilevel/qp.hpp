#pragma once

// Primal active-set method for strongly convex quadratic programs
//
//   min 1/2 x'Qx + q'x   s.t.  M_ub x <= g_ub,  M_eq x = g_eq.
//
// A feasible start comes from the caller (warm start), the unconstrained
// minimiser, or an LP feasibility vertex, in that order. Each iteration
// solves the equality-constrained KKT system on the working set. The final
// working set is re-solved once so that the returned point sits exactly on
// its active constraints.

#include "bilevel/lp.hpp"

#include <Eigen/Eigenvalues>

#include <optional>

namespace bilevel {

enum class QpStatus { Optimal, Infeasible };

struct QPSolution {
  QpStatus status = QpStatus::Infeasible;
  Vector x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  IndexSet active_set;   // inequality rows in the final working set
  Vector multipliers;    // per inequality row, zero off the active set
  Vector multipliers_eq;
  std::size_t iterations = 0;
};

struct QpOptions {
  double spd_tol = 1e-10;
  double feas_tol = 1e-9;
  std::size_t max_iterations = 0;
  bool check_spd = true;
};

inline double smallest_eigenvalue(const Matrix& Q) {
  if (Q.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// ‖Qx + q + M_ub'λ + M_eq'μ‖∞ together with the sign and complementarity
/// violations of the multipliers.
inline double qp_kkt_residual(const Matrix& Q, const Vector& q, const AffineSystem& sys,
                              const QPSolution& s) {
  Vector r = Q * s.x + q;
  double worst = 0.0;
  if (sys.rows_ub() > 0) {
    r += sys.M_ub.transpose() * s.multipliers;
    const Vector slack = sys.g_ub - sys.M_ub * s.x;
    worst = std::max(worst, -s.multipliers.minCoeff());
    worst = std::max(worst, s.multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  if (sys.rows_eq() > 0) r += sys.M_eq.transpose() * s.multipliers_eq;
  if (r.size() > 0) worst = std::max(worst, r.cwiseAbs().maxCoeff());
  return worst;
}

namespace detail {

// Solves [Q A'; A 0][x; l] = [rhs_x; rhs_c].
inline std::pair<Vector, Vector> solve_kkt(const Matrix& Q, const Matrix& Aw,
                                           const Vector& rhs_x, const Vector& rhs_c) {
  const Eigen::Index n = Q.rows();
  const Eigen::Index k = Aw.rows();
  Matrix K = Matrix::Zero(n + k, n + k);
  K.topLeftCorner(n, n) = Q;
  if (k > 0) {
    K.topRightCorner(n, k) = Aw.transpose();
    K.bottomLeftCorner(k, n) = Aw;
  }
  Vector rhs(n + k);
  rhs << rhs_x, rhs_c;
  Eigen::PartialPivLU<Matrix> lu(K);
  Vector sol = lu.solve(rhs);
  // one step of iterative refinement
  sol += lu.solve(rhs - K * sol);
  return {sol.head(n), sol.tail(k)};
}

inline bool independent_of(const Matrix& rows, const Vector& a) {
  if (rows.rows() == 0) return a.norm() > 1e-12;
  Matrix stacked(rows.rows() + 1, rows.cols());
  stacked << rows, a.transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked.transpose());
  qr.setThreshold(1e-10);
  return qr.rank() == stacked.rows();
}

}  // namespace detail

inline QPSolution solve_qp(const Matrix& Q_in, const Vector& q, const AffineSystem& sys,
                           const std::optional<Vector>& warm = std::nullopt,
                           const QpOptions& opts = {}) {
  const Eigen::Index n = q.size();
  if (Q_in.rows() != n || Q_in.cols() != n)
    throw DimensionError("solve_qp: Q must be n x n with n = |q|");
  sys.validate(n);
  const Matrix Q = 0.5 * (Q_in + Q_in.transpose());
  if (opts.check_spd && smallest_eigenvalue(Q) <= opts.spd_tol)
    throw NotSPD("solve_qp: Q is not symmetric positive definite");

  const Eigen::Index r_ub = sys.rows_ub();
  const Eigen::Index r_eq = sys.rows_eq();
  QPSolution out;

  // Feasible start.
  Vector x;
  if (warm && warm->size() == n && sys.feasible(*warm, opts.feas_tol)) {
    x = *warm;
  } else {
    Eigen::LLT<Matrix> llt(Q);
    Vector xu = llt.solve(-q);
    if (sys.feasible(xu, opts.feas_tol)) {
      x = xu;
    } else {
      LPSolution lp = solve_lp(Vector::Zero(n), sys);
      if (lp.status != LpStatus::Optimal) {
        out.status = QpStatus::Infeasible;
        return out;
      }
      x = lp.x;
    }
  }

  // Working set: equalities first, then independent active inequalities.
  std::vector<Eigen::Index> work_eq, work_ub;
  Matrix Aw(0, n);
  auto push_row = [&](const Vector& a) {
    Aw.conservativeResize(Aw.rows() + 1, Eigen::NoChange);
    Aw.row(Aw.rows() - 1) = a.transpose();
  };
  for (Eigen::Index e = 0; e < r_eq; ++e) {
    const Vector a = sys.M_eq.row(e).transpose();
    if (detail::independent_of(Aw, a)) {
      push_row(a);
      work_eq.push_back(e);
    }
  }
  std::vector<char> in_work(r_ub, 0);
  for (Eigen::Index i = 0; i < r_ub; ++i) {
    const double slack = sys.g_ub(i) - sys.M_ub.row(i).dot(x);
    if (slack > opts.feas_tol) continue;
    const Vector a = sys.M_ub.row(i).transpose();
    if (static_cast<Eigen::Index>(work_eq.size() + work_ub.size()) < n &&
        detail::independent_of(Aw, a)) {
      push_row(a);
      work_ub.push_back(i);
      in_work[i] = 1;
    }
  }

  auto rebuild = [&]() {
    Aw.resize(static_cast<Eigen::Index>(work_eq.size() + work_ub.size()), n);
    Eigen::Index k = 0;
    for (auto e : work_eq) Aw.row(k++) = sys.M_eq.row(e);
    for (auto i : work_ub) Aw.row(k++) = sys.M_ub.row(i);
  };

  const std::size_t max_it =
      opts.max_iterations ? opts.max_iterations
                          : static_cast<std::size_t>(20 * (n + r_ub + r_eq) + 200);
  for (;;) {
    if (out.iterations++ >= max_it)
      throw NumericDegeneracy("solve_qp: active-set iteration limit reached");
    const Vector grad = Q * x + q;
    auto [p, lam] = detail::solve_kkt(Q, Aw, -grad, Vector::Zero(Aw.rows()));
    const double xscale = 1.0 + x.cwiseAbs().maxCoeff();
    if (p.cwiseAbs().maxCoeff() <= 1e-11 * xscale) {
      Eigen::Index drop = -1;
      double most = -1e-11 * (1.0 + grad.cwiseAbs().maxCoeff());
      for (std::size_t k = 0; k < work_ub.size(); ++k) {
        const double l = lam(static_cast<Eigen::Index>(work_eq.size() + k));
        if (l < most) {
          most = l;
          drop = static_cast<Eigen::Index>(k);
        }
      }
      if (drop < 0) break;
      in_work[work_ub[drop]] = 0;
      work_ub.erase(work_ub.begin() + drop);
      rebuild();
      continue;
    }
    double alpha = 1.0;
    Eigen::Index block = -1;
    for (Eigen::Index i = 0; i < r_ub; ++i) {
      if (in_work[i]) continue;
      const double ap = sys.M_ub.row(i).dot(p);
      if (ap <= 1e-12 * sys.M_ub.row(i).norm() * p.norm()) continue;
      const double slack = std::max(sys.g_ub(i) - sys.M_ub.row(i).dot(x), 0.0);
      const double t = slack / ap;
      if (t < alpha) {
        alpha = t;
        block = i;
      }
    }
    x += alpha * p;
    if (block >= 0) {
      work_ub.push_back(block);
      in_work[block] = 1;
      push_row(sys.M_ub.row(block).transpose());
    }
  }

  // Re-solve on the final working set.
  Vector rhs_c(Aw.rows());
  {
    Eigen::Index k = 0;
    for (auto e : work_eq) rhs_c(k++) = sys.g_eq(e);
    for (auto i : work_ub) rhs_c(k++) = sys.g_ub(i);
  }
  auto [xp, lam] = detail::solve_kkt(Q, Aw, -q, rhs_c);
  if (sys.violation(xp) <= std::max(sys.violation(x), opts.feas_tol)) x = xp;

  out.status = QpStatus::Optimal;
  out.x = x;
  out.objective = 0.5 * x.dot(Q * x) + q.dot(x);
  out.multipliers = Vector::Zero(r_ub);
  out.multipliers_eq = Vector::Zero(r_eq);
  for (std::size_t k = 0; k < work_eq.size(); ++k)
    out.multipliers_eq(work_eq[k]) = lam(static_cast<Eigen::Index>(k));
  for (std::size_t k = 0; k < work_ub.size(); ++k)
    out.multipliers(work_ub[k]) =
        std::max(lam(static_cast<Eigen::Index>(work_eq.size() + k)), 0.0);
  out.active_set.assign(work_ub.begin(), work_ub.end());
  std::sort(out.active_set.begin(), out.active_set.end());
  return out;
}

/// Euclidean projection of w0 onto {v : sys}.
inline Vector project_polyhedron(const Vector& w0, const AffineSystem& sys) {
  const Eigen::Index n = w0.size();
  QPSolution s = solve_qp(Matrix::Identity(n, n), -w0, sys, std::nullopt,
                          QpOptions{.check_spd = false});
  if (s.status != QpStatus::Optimal)
    throw InfeasibleProblem("project_polyhedron: polyhedron is empty");
  return s.x;
}

}  // namespace bilevel
