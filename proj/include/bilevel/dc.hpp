#pragma once

// DC machinery for the penalised value-function problem
//
//   phi(w) = f(x, y) + sigma (c'y - theta(x))  over  Z_l ∩ Z_u,
//
// split as phi = g - h with
//
//   g(w) = 1/2 w'(Q + rho I)w + (q + sigma (0, c))'w + const   (smooth, strongly convex)
//   h(w) = rho/2 |w|^2 + sigma theta(x)                          (convex)
//
// where rho = max(0, -lambda_min(Q)) + 1. Each DC step minimises
// g(w) - xi'w with xi in ∂h(w^k); the boosted variant then backtracks along
// d = z - w from z.

#include "bilevel/instance.hpp"
#include "bilevel/qp.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace bilevel {

struct DCDecomposition {
  Matrix Q_g;
  Vector q_g;           // includes the sigma (0, c) term
  Vector q_f;           // linear term of f alone
  double constant = 0.0;
  double rho = 1.0;
  double sigma = 0.0;
  Eigen::Index n = 0;   // leading x-block size inside w (0 until penalised)

  double g(const Vector& w) const { return 0.5 * w.dot(Q_g * w) + q_g.dot(w) + constant; }
  double h(const Vector& w, double theta) const {
    return 0.5 * rho * w.squaredNorm() + sigma * theta;
  }
};

inline DCDecomposition dc_split(const QuadObjective& obj) {
  const Eigen::Index dim = obj.q.size();
  const Matrix Q = 0.5 * (obj.Q + obj.Q.transpose());
  const double lam_min = dim ? smallest_eigenvalue(Q) : 0.0;
  DCDecomposition dec;
  dec.rho = std::max(0.0, -lam_min) + 1.0;
  dec.Q_g = Q + dec.rho * Matrix::Identity(dim, dim);
  dec.q_f = obj.q;
  dec.q_g = obj.q;
  dec.constant = obj.constant;
  return dec;
}

/// The decomposition of f + sigma (c'y - theta(x)) for the given lower level.
inline DCDecomposition with_penalty(DCDecomposition dec, double sigma, const LowerLevel& ll) {
  if (dec.q_f.size() != ll.n() + ll.m())
    throw DimensionError("with_penalty: objective does not match (x, y)");
  dec.sigma = sigma;
  dec.n = ll.n();
  dec.q_g = dec.q_f;
  dec.q_g.tail(ll.m()) += sigma * ll.c;
  return dec;
}

/// phi(w) = g(w) - h(w); nullopt where theta(x) = +inf.
inline std::optional<double> penalized_value(const BilevelInstance& inst,
                                             const DCDecomposition& dec, const Vector& w) {
  const ThetaEval t = eval_theta(inst.lower, inst.x_of(w));
  if (!t.finite) return std::nullopt;
  return dec.g(w) - dec.h(w, t.value);
}

inline Vector dc_subproblem(const DCDecomposition& dec, const Vector& xi,
                            const AffineSystem& sys,
                            const std::optional<Vector>& warm = std::nullopt) {
  QpOptions opts;
  opts.check_spd = false;  // Q_g >= rho I by construction
  const QPSolution s = solve_qp(dec.Q_g, dec.q_g - xi, sys, warm, opts);
  if (s.status != QpStatus::Optimal)
    throw InfeasibleProblem("dc_subproblem: feasible polyhedron is empty");
  return s.x;
}

struct LineSearchParams {
  double step0 = 1.0;    // λ̄
  double alpha = 1e-2;   // sufficient-decrease constant
  double beta = 1e-1;    // backtracking factor
  int max_trials = 10;
  double feas_tol = 1e-9;
};

struct LineSearchResult {
  double step = 0.0;
  double phi_z = 0.0;
  double phi_trial = 0.0;  // value at z + step d when step > 0
  int trials = 0;
};

using PenalizedFn = std::function<std::optional<double>(const Vector&)>;

/// Largest λ in {λ̄ β^j : j < max_trials} with z + λd feasible and
/// phi(z + λd) <= phi(z) - alpha λ² |d|², or 0.
inline LineSearchResult boosted_line_search(const PenalizedFn& phi, const Vector& z,
                                            const Vector& d, const AffineSystem& sys,
                                            const LineSearchParams& params = {},
                                            std::optional<double> phi_z = std::nullopt) {
  LineSearchResult out;
  const double dn2 = d.squaredNorm();
  if (std::sqrt(dn2) <= 1e-12) return out;
  if (!phi_z) phi_z = phi(z);
  if (!phi_z) return out;
  out.phi_z = *phi_z;
  double lambda = params.step0;
  for (int j = 0; j < params.max_trials; ++j, lambda *= params.beta) {
    ++out.trials;
    const Vector trial = z + lambda * d;
    if (!sys.feasible(trial, params.feas_tol)) continue;
    const auto val = phi(trial);
    if (!val) continue;
    if (*val <= out.phi_z - params.alpha * lambda * lambda * dn2) {
      out.step = lambda;
      out.phi_trial = *val;
      return out;
    }
  }
  return out;
}

enum class DCVariant { Classical, Boosted };

struct DCOptions {
  double tol = 1e-4;           // on |z^k - w^k|
  std::size_t max_iterations = 100;
  LineSearchParams line_search;
};

struct DCTraceEntry {
  Vector w;
  double phi_w = 0.0;
  Vector z;
  double phi_z = 0.0;
  double d_norm = 0.0;
  double step = 0.0;
  double phi_next = 0.0;  // phi at the next iterate
  Vector next;            // z + step d, pulled back onto Z when it leaves it by > 1e-12
};

struct DCState {
  Vector w;
  std::vector<DCTraceEntry> trace;
  std::size_t iterations = 0;
  bool converged = false;
};

inline DCState solve_dc(const BilevelInstance& inst, const DCDecomposition& dec,
                        const Vector& start, DCVariant variant, const DCOptions& opts = {}) {
  const AffineSystem sys = inst.feasible_set();
  if (!sys.feasible(start, 1e-9))
    throw InfeasibleStart("solve_dc: start is not in Z_u ∩ Z_l");

  // One-entry memo: the line search usually evaluates the next iterate.
  Vector memo_x;
  ThetaEval memo;
  auto theta_at = [&](const Vector& w) -> const ThetaEval& {
    const Vector x = inst.x_of(w);
    if (memo_x.size() != x.size() || memo_x != x) {
      memo = eval_theta(inst.lower, x);
      memo_x = x;
    }
    return memo;
  };
  auto phi = [&](const Vector& w) -> std::optional<double> {
    const ThetaEval& t = theta_at(w);
    if (!t.finite) return std::nullopt;
    return dec.g(w) - dec.h(w, t.value);
  };

  DCState st;
  Vector w = start;
  auto phi_w = phi(w);
  if (!phi_w) throw DomainError("solve_dc: theta is +inf at the start");

  for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
    st.iterations = it;
    const ThetaEval& tw = theta_at(w);
    Vector xi = dec.rho * w;
    xi.head(inst.n()) += dec.sigma * (inst.lower.A.transpose() * tw.dual);

    DCTraceEntry e;
    e.w = w;
    e.phi_w = *phi_w;
    e.z = dc_subproblem(dec, xi, sys, w);
    const Vector d = e.z - w;
    e.d_norm = d.norm();
    const auto phi_z = phi(e.z);
    if (!phi_z) throw DomainError("solve_dc: theta is +inf at a subproblem solution");
    e.phi_z = *phi_z;

    if (e.d_norm <= opts.tol) {
      e.phi_next = e.phi_z;
      e.next = e.z;
      st.trace.push_back(e);
      w = e.z;
      st.converged = true;
      break;
    }
    if (variant == DCVariant::Boosted) {
      const LineSearchResult ls =
          boosted_line_search(phi, e.z, d, sys, opts.line_search, e.phi_z);
      e.step = ls.step;
      e.phi_next = ls.step > 0.0 ? ls.phi_trial : e.phi_z;
      e.next = e.z + e.step * d;
      // The line search accepts points up to feas_tol outside Z, where phi
      // may undercut its values on Z; pull such points back and re-test.
      if (e.step > 0.0 && sys.violation(e.next) > 1e-12) {
        const Vector back = project_polyhedron(e.next, sys);
        const auto phi_back = phi(back);
        const double bound =
            e.phi_z - opts.line_search.alpha * e.step * e.step * d.squaredNorm();
        if (phi_back && *phi_back <= bound) {
          e.next = back;
          e.phi_next = *phi_back;
        } else {
          e.step = 0.0;
          e.next = e.z;
          e.phi_next = e.phi_z;
        }
      }
    } else {
      e.phi_next = e.phi_z;
      e.next = e.z;
    }
    w = e.next;
    phi_w = e.phi_next;
    st.trace.push_back(std::move(e));
  }
  st.w = w;
  return st;
}

}  // namespace bilevel
