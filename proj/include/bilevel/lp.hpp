#pragma once

// Dense two-phase revised simplex over free variables.
//
//   min  cost' v   s.t.  M_ub v <= g_ub,  M_eq v = g_eq
//
// Rows of the form  a * v_j <= g  with a < 0 are treated as lower bounds on
// v_j (no splitting, no slack); every other variable is split into a
// positive and a negative part. Pricing is Dantzig until the first
// degenerate pivot, Bland from then on, so runs are deterministic and
// finite. The basis matrix is refactored every iteration.
//
// Dual convention: cost + M_ub' dual_ub + M_eq' dual_eq = 0, dual_ub >= 0,
// so the dual objective is  -g_ub' dual_ub - g_eq' dual_eq.

#include "bilevel/affine_system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bilevel {

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

struct LPSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Vector dual_ub;
  Vector dual_eq;
  IndexSet basis;  // basic columns of the internal standard form
  std::size_t iterations = 0;
};

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-12;
  std::size_t max_iterations = 0;  // 0: derived from problem size
};

namespace detail {

struct StandardForm {
  Matrix A;      // rows x cols, artificial columns last
  Vector b;      // >= 0
  Vector cost;   // phase-2 costs, zero on slacks and artificials
  std::vector<double> row_sign;
  std::vector<Eigen::Index> row_source;  // >= 0: ub row, < 0: -(eq row) - 1
  Eigen::Index structural = 0;           // columns before slacks
  Eigen::Index first_artificial = 0;
  std::vector<Eigen::Index> initial_basis;

  // Map from original variables to standard columns.
  std::vector<Eigen::Index> pos_col, neg_col;  // neg_col = -1 if bounded
  std::vector<double> lower;                   // valid when neg_col = -1
  std::vector<Eigen::Index> bound_row;         // ub row used as the bound
  std::vector<double> bound_coef;              // its (negative) coefficient
  std::vector<Eigen::Index> slack_col;         // per ub row, -1 if bound row
};

inline StandardForm build_standard_form(const Vector& cost, const AffineSystem& sys) {
  const Eigen::Index n = cost.size();
  const Eigen::Index r_ub = sys.rows_ub();
  const Eigen::Index r_eq = sys.rows_eq();

  StandardForm sf;
  sf.lower.assign(n, 0.0);
  sf.bound_row.assign(n, -1);
  sf.bound_coef.assign(n, 0.0);
  sf.slack_col.assign(r_ub, -1);

  // Pick the tightest single-entry negative row per variable as its bound.
  for (Eigen::Index i = 0; i < r_ub; ++i) {
    Eigen::Index nz = 0, col = -1;
    for (Eigen::Index j = 0; j < n; ++j)
      if (sys.M_ub(i, j) != 0.0) { ++nz; col = j; }
    if (nz != 1 || sys.M_ub(i, col) >= 0.0) continue;
    const double a = sys.M_ub(i, col);
    const double l = sys.g_ub(i) / a;
    if (sf.bound_row[col] < 0 || l > sf.lower[col]) {
      sf.bound_row[col] = i;
      sf.bound_coef[col] = a;
      sf.lower[col] = l;
    }
  }
  std::vector<char> is_bound_row(r_ub, 0);
  for (Eigen::Index j = 0; j < n; ++j)
    if (sf.bound_row[j] >= 0) is_bound_row[sf.bound_row[j]] = 1;

  Eigen::Index cols = 0;
  sf.pos_col.assign(n, -1);
  sf.neg_col.assign(n, -1);
  for (Eigen::Index j = 0; j < n; ++j) {
    sf.pos_col[j] = cols++;
    if (sf.bound_row[j] < 0) sf.neg_col[j] = cols++;
  }
  sf.structural = cols;

  std::vector<Eigen::Index> general_ub;
  for (Eigen::Index i = 0; i < r_ub; ++i)
    if (!is_bound_row[i]) {
      general_ub.push_back(i);
      sf.slack_col[i] = cols++;
    }
  const Eigen::Index rows = static_cast<Eigen::Index>(general_ub.size()) + r_eq;

  // Shifted right-hand sides and sign normalisation.
  Vector shift = Vector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j)
    if (sf.bound_row[j] >= 0) shift(j) = sf.lower[j];

  sf.row_sign.assign(rows, 1.0);
  sf.row_source.assign(rows, 0);
  Vector rhs(rows);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(general_ub.size()); ++k) {
    const Eigen::Index i = general_ub[k];
    sf.row_source[k] = i;
    rhs(k) = sys.g_ub(i) - sys.M_ub.row(i).dot(shift);
  }
  for (Eigen::Index e = 0; e < r_eq; ++e) {
    const Eigen::Index k = static_cast<Eigen::Index>(general_ub.size()) + e;
    sf.row_source[k] = -e - 1;
    rhs(k) = sys.g_eq(e) - sys.M_eq.row(e).dot(shift);
  }
  for (Eigen::Index k = 0; k < rows; ++k)
    if (rhs(k) < 0.0) sf.row_sign[k] = -1.0;

  // Rows needing an artificial: equality rows and flipped inequality rows.
  std::vector<Eigen::Index> needs_art;
  sf.initial_basis.assign(rows, -1);
  for (Eigen::Index k = 0; k < rows; ++k) {
    if (sf.row_source[k] >= 0 && sf.row_sign[k] > 0)
      sf.initial_basis[k] = sf.slack_col[sf.row_source[k]];
    else
      needs_art.push_back(k);
  }
  sf.first_artificial = cols;
  const Eigen::Index total = cols + static_cast<Eigen::Index>(needs_art.size());

  sf.A = Matrix::Zero(rows, total);
  sf.b = Vector(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const double s = sf.row_sign[k];
    const Eigen::Index src = sf.row_source[k];
    const auto row = src >= 0 ? Vector(sys.M_ub.row(src).transpose())
                              : Vector(sys.M_eq.row(-src - 1).transpose());
    for (Eigen::Index j = 0; j < n; ++j) {
      sf.A(k, sf.pos_col[j]) = s * row(j);
      if (sf.neg_col[j] >= 0) sf.A(k, sf.neg_col[j]) = -s * row(j);
    }
    if (src >= 0) sf.A(k, sf.slack_col[src]) = s;
    sf.b(k) = s * rhs(k);
  }
  for (std::size_t a = 0; a < needs_art.size(); ++a) {
    const Eigen::Index k = needs_art[a];
    const Eigen::Index col = cols + static_cast<Eigen::Index>(a);
    sf.A(k, col) = 1.0;
    sf.initial_basis[k] = col;
  }

  sf.cost = Vector::Zero(total);
  for (Eigen::Index j = 0; j < n; ++j) {
    sf.cost(sf.pos_col[j]) = cost(j);
    if (sf.neg_col[j] >= 0) sf.cost(sf.neg_col[j]) = -cost(j);
  }
  return sf;
}

enum class CoreResult { Optimal, Unbounded };

struct Factorized {
  Eigen::PartialPivLU<Matrix> lu;
  Vector xB;
  Vector pi;
};

inline Factorized factorize(const Matrix& A, const Vector& b, const Vector& cost,
                            const std::vector<Eigen::Index>& basis,
                            const LpOptions& opts) {
  const Eigen::Index rows = A.rows();
  Matrix B(rows, rows);
  Vector cB(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    B.col(i) = A.col(basis[i]);
    cB(i) = cost(basis[i]);
  }
  Factorized f{Eigen::PartialPivLU<Matrix>(B), {}, {}};
  const auto& U = f.lu.matrixLU();
  for (Eigen::Index i = 0; i < rows; ++i)
    if (std::abs(U(i, i)) < opts.pivot_tol)
      throw NumericDegeneracy("simplex: singular basis (pivot below tolerance)");
  f.xB = f.lu.solve(b);
  f.pi = f.lu.transpose().solve(cB);
  return f;
}

inline CoreResult simplex_core(const Matrix& A, const Vector& b, const Vector& cost,
                               std::vector<Eigen::Index>& basis,
                               Eigen::Index enter_limit, const LpOptions& opts,
                               std::size_t& iterations, std::size_t max_iterations) {
  const Eigen::Index rows = A.rows();
  std::vector<char> in_basis(A.cols(), 0);
  for (auto j : basis) in_basis[j] = 1;
  bool bland = false;

  for (;;) {
    if (iterations >= max_iterations)
      throw NumericDegeneracy("simplex: iteration limit reached");
    Factorized f = factorize(A, b, cost, basis, opts);

    Eigen::Index enter = -1;
    double best = -opts.dual_tol;
    for (Eigen::Index j = 0; j < enter_limit; ++j) {
      if (in_basis[j]) continue;
      const double d = cost(j) - A.col(j).dot(f.pi);
      if (d < best) {
        enter = j;
        if (bland) break;
        best = d;
      }
    }
    if (enter < 0) return CoreResult::Optimal;

    const Vector u = f.lu.solve(A.col(enter));
    const double scale = std::max(1.0, u.cwiseAbs().maxCoeff());
    Eigen::Index leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (u(i) <= 1e-9 * scale) continue;
      const double t = std::max(f.xB(i), 0.0) / u(i);
      const double tie = 1e-12 * (1.0 + ratio);
      if (leave < 0 || t < ratio - tie) {
        leave = i;
        ratio = t;
      } else if (t <= ratio + tie) {
        const bool better = bland ? basis[i] < basis[leave] : u(i) > u(leave);
        if (better) {
          leave = i;
          ratio = std::min(ratio, t);
        }
      }
    }
    if (leave < 0) return CoreResult::Unbounded;
    if (u(leave) < opts.pivot_tol)
      throw NumericDegeneracy("simplex: pivot magnitude below tolerance");
    if (ratio <= opts.primal_tol) bland = true;

    in_basis[basis[leave]] = 0;
    basis[leave] = enter;
    in_basis[enter] = 1;
    ++iterations;
  }
}

}  // namespace detail

inline LPSolution solve_lp(const Vector& cost, const AffineSystem& sys,
                           const LpOptions& opts = {}) {
  sys.validate(cost.size());
  if (!cost.allFinite()) throw DimensionError("solve_lp: non-finite cost");
  const Eigen::Index n = cost.size();

  detail::StandardForm sf = detail::build_standard_form(cost, sys);
  const Eigen::Index rows = sf.A.rows();
  const Eigen::Index total = sf.A.cols();
  const std::size_t max_it =
      opts.max_iterations ? opts.max_iterations
                          : static_cast<std::size_t>(50 * (rows + total) + 1000);

  LPSolution out;
  std::vector<Eigen::Index> basis = sf.initial_basis;

  if (rows > 0 && sf.first_artificial < total) {
    Vector phase1 = Vector::Zero(total);
    phase1.tail(total - sf.first_artificial).setOnes();
    detail::simplex_core(sf.A, sf.b, phase1, basis, total, opts, out.iterations, max_it);
    auto f = detail::factorize(sf.A, sf.b, phase1, basis, opts);
    double infeas = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i)
      if (basis[i] >= sf.first_artificial) infeas += std::max(f.xB(i), 0.0);
    const double scale = 1.0 + sf.b.cwiseAbs().maxCoeff();
    if (infeas > opts.primal_tol * scale) {
      out.status = LpStatus::Infeasible;
      return out;
    }
    // Pivot zero-level artificials out where a structural column allows it.
    std::vector<char> in_basis(total, 0);
    for (auto j : basis) in_basis[j] = 1;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (basis[r] < sf.first_artificial) continue;
      auto fr = detail::factorize(sf.A, sf.b, phase1, basis, opts);
      Vector er = Vector::Zero(rows);
      er(r) = 1.0;
      const Vector rowinv = fr.lu.transpose().solve(er);
      Eigen::Index pick = -1;
      double mag = 1e-9;
      for (Eigen::Index j = 0; j < sf.first_artificial; ++j) {
        if (in_basis[j]) continue;
        const double v = std::abs(sf.A.col(j).dot(rowinv));
        if (v > mag) { mag = v; pick = j; }
      }
      if (pick >= 0) {
        in_basis[basis[r]] = 0;
        basis[r] = pick;
        in_basis[pick] = 1;
      }
    }
  }

  if (rows > 0) {
    auto res = detail::simplex_core(sf.A, sf.b, sf.cost, basis, sf.first_artificial, opts,
                                    out.iterations, max_it);
    if (res == detail::CoreResult::Unbounded) {
      out.status = LpStatus::Unbounded;
      return out;
    }
  } else {
    for (Eigen::Index j = 0; j < total; ++j)
      if (sf.cost(j) < -opts.dual_tol) {
        out.status = LpStatus::Unbounded;
        return out;
      }
  }

  Vector v = Vector::Zero(total);
  Vector pi = Vector::Zero(rows);
  if (rows > 0) {
    auto f = detail::factorize(sf.A, sf.b, sf.cost, basis, opts);
    for (Eigen::Index i = 0; i < rows; ++i) v(basis[i]) = std::max(f.xB(i), 0.0);
    pi = f.pi;
  }

  out.status = LpStatus::Optimal;
  out.x = Vector(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (sf.neg_col[j] >= 0)
      out.x(j) = v(sf.pos_col[j]) - v(sf.neg_col[j]);
    else
      out.x(j) = sf.lower[j] + v(sf.pos_col[j]);
  }
  out.objective = cost.dot(out.x);

  out.dual_ub = Vector::Zero(sys.rows_ub());
  out.dual_eq = Vector::Zero(sys.rows_eq());
  for (Eigen::Index k = 0; k < rows; ++k) {
    const double val = -sf.row_sign[k] * pi(k);
    const Eigen::Index src = sf.row_source[k];
    if (src >= 0)
      out.dual_ub(src) = std::max(val, 0.0);
    else
      out.dual_eq(-src - 1) = val;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (sf.bound_row[j] < 0) continue;
    const Eigen::Index col = sf.pos_col[j];
    const double d = sf.cost(col) - sf.A.col(col).dot(pi);
    out.dual_ub(sf.bound_row[j]) = std::max(d, 0.0) / -sf.bound_coef[j];
  }
  out.basis.assign(basis.begin(), basis.end());
  std::sort(out.basis.begin(), out.basis.end());
  return out;
}

/// Largest violation of the dual constraints  cost + M_ub'λ + M_eq'μ = 0, λ >= 0.
inline double lp_dual_residual(const Vector& cost, const AffineSystem& sys,
                               const LPSolution& sol) {
  Vector r = cost;
  if (sys.rows_ub() > 0) r += sys.M_ub.transpose() * sol.dual_ub;
  if (sys.rows_eq() > 0) r += sys.M_eq.transpose() * sol.dual_eq;
  double worst = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  if (sol.dual_ub.size()) worst = std::max(worst, -sol.dual_ub.minCoeff());
  return worst;
}

inline double lp_dual_objective(const AffineSystem& sys, const LPSolution& sol) {
  double v = 0.0;
  if (sys.rows_ub() > 0) v -= sys.g_ub.dot(sol.dual_ub);
  if (sys.rows_eq() > 0) v -= sys.g_eq.dot(sol.dual_eq);
  return v;
}

}  // namespace bilevel
