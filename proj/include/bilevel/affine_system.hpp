#pragma once

#include "bilevel/types.hpp"

#include <algorithm>
#include <cmath>

namespace bilevel {

/// Constraint system  M_ub v <= g_ub,  M_eq v = g_eq  over free variables v.
struct AffineSystem {
  Matrix M_ub;
  Vector g_ub;
  Matrix M_eq;
  Vector g_eq;

  AffineSystem() = default;
  AffineSystem(Matrix m_ub, Vector rhs_ub)
      : M_ub(std::move(m_ub)), g_ub(std::move(rhs_ub)) {
    M_eq.resize(0, M_ub.cols());
    g_eq.resize(0);
  }
  AffineSystem(Matrix m_ub, Vector rhs_ub, Matrix m_eq, Vector rhs_eq)
      : M_ub(std::move(m_ub)),
        g_ub(std::move(rhs_ub)),
        M_eq(std::move(m_eq)),
        g_eq(std::move(rhs_eq)) {}

  Eigen::Index vars() const { return std::max(M_ub.cols(), M_eq.cols()); }
  Eigen::Index rows_ub() const { return M_ub.rows(); }
  Eigen::Index rows_eq() const { return M_eq.rows(); }

  void validate(Eigen::Index expected_vars = -1) const {
    if (M_ub.rows() != g_ub.size())
      throw DimensionError("AffineSystem: M_ub rows != g_ub length");
    if (M_eq.rows() != g_eq.size())
      throw DimensionError("AffineSystem: M_eq rows != g_eq length");
    if (M_ub.rows() > 0 && M_eq.rows() > 0 && M_ub.cols() != M_eq.cols())
      throw DimensionError("AffineSystem: M_ub and M_eq column counts differ");
    if (expected_vars >= 0 && (M_ub.rows() > 0 || M_eq.rows() > 0) &&
        vars() != expected_vars)
      throw DimensionError("AffineSystem: variable count mismatch");
    if (!M_ub.allFinite() || !g_ub.allFinite() || !M_eq.allFinite() ||
        !g_eq.allFinite())
      throw DimensionError("AffineSystem: non-finite entry");
  }

  /// Largest constraint violation at v (0 when feasible).
  double violation(const Vector& v) const {
    double worst = 0.0;
    if (M_ub.rows() > 0)
      worst = std::max(worst, (M_ub * v - g_ub).maxCoeff());
    if (M_eq.rows() > 0)
      worst = std::max(worst, (M_eq * v - g_eq).cwiseAbs().maxCoeff());
    return worst;
  }

  bool feasible(const Vector& v, double tol = 1e-9) const {
    return violation(v) <= tol;
  }
};

/// Vertical concatenation of two inequality blocks over the same variables.
inline AffineSystem stack_ub(const Matrix& M1, const Vector& g1, const Matrix& M2,
                             const Vector& g2) {
  Matrix M(M1.rows() + M2.rows(), std::max(M1.cols(), M2.cols()));
  Vector g(g1.size() + g2.size());
  if (M1.rows() > 0) M.topRows(M1.rows()) = M1;
  if (M2.rows() > 0) M.bottomRows(M2.rows()) = M2;
  g << g1, g2;
  return AffineSystem(std::move(M), std::move(g));
}

}  // namespace bilevel
