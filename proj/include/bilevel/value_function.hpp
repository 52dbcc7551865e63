#pragma once

// Lower-level optimal value function
//
//   theta(x) = inf_y { c'y : Ax + By <= b }
//
// evaluated by one LP solve per point. The LP dual multiplier λ' of
// By <= b - Ax satisfies B'λ' = -c, λ' >= 0, and A'λ' is a subgradient of
// the convex piecewise-affine function theta at x.

#include "bilevel/lp.hpp"

#include <optional>

namespace bilevel {

struct LowerLevel {
  Matrix A;  // p x n
  Matrix B;  // p x m
  Vector b;  // p
  Vector c;  // m

  Eigen::Index n() const { return A.cols(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return A.rows(); }

  void validate() const {
    if (B.rows() != A.rows() || b.size() != A.rows() || c.size() != B.cols())
      throw DimensionError("LowerLevel: inconsistent dimensions");
    if (!A.allFinite() || !B.allFinite() || !b.allFinite() || !c.allFinite())
      throw DimensionError("LowerLevel: non-finite entry");
  }

  /// The lower-level constraint system in y for fixed x.
  AffineSystem system_at(const Vector& x) const {
    return AffineSystem(B, b - A * x);
  }
};

struct ThetaEval {
  bool finite = false;  // false means theta(x) = +infinity
  double value = 0.0;   // meaningful only when finite
  Vector dual;          // λ' in the dual solution set, present iff finite
  Vector y_opt;         // a lower-level solution, present iff finite
};

inline ThetaEval eval_theta(const LowerLevel& ll, const Vector& x) {
  if (x.size() != ll.n()) throw DimensionError("eval_theta: |x| != n");
  const LPSolution s = solve_lp(ll.c, ll.system_at(x));
  ThetaEval out;
  switch (s.status) {
    case LpStatus::Infeasible:
      return out;
    case LpStatus::Unbounded:
      throw LowerLevelUnbounded("lower-level LP is unbounded at the given x");
    case LpStatus::Optimal:
      break;
  }
  out.finite = true;
  out.value = s.objective;
  out.dual = s.dual_ub;
  out.y_opt = s.x;
  return out;
}

inline Vector subgradient_theta(const LowerLevel& ll, const Vector& x) {
  const ThetaEval t = eval_theta(ll, x);
  if (!t.finite) throw DomainError("subgradient_theta: x is outside dom theta");
  return ll.A.transpose() * t.dual;
}

inline Vector lower_level_solve(const LowerLevel& ll, const Vector& x) {
  const ThetaEval t = eval_theta(ll, x);
  if (!t.finite) throw DomainError("lower_level_solve: lower-level problem infeasible");
  return t.y_opt;
}

/// c'y - theta(x); nonnegative for every lower-level feasible pair.
inline double duality_gap(const LowerLevel& ll, const Vector& x, const Vector& y) {
  if (x.size() != ll.n() || y.size() != ll.m())
    throw DimensionError("duality_gap: dimension mismatch");
  const double viol = ll.p() ? (ll.A * x + ll.B * y - ll.b).maxCoeff() : 0.0;
  if (viol > 1e-9) throw InfeasiblePoint("duality_gap: Ax + By <= b violated");
  const ThetaEval t = eval_theta(ll, x);
  if (!t.finite) throw DomainError("duality_gap: theta(x) = +inf");
  return ll.c.dot(y) - t.value;
}

}  // namespace bilevel
