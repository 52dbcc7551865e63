#pragma once

// Outer penalty loop on the value-function reformulation
//
//   min f(x, y) + sigma_k (c'y - theta(x))  over  Z_l ∩ Z_u,   sigma_k = sigma0 gamma^k,
//
// with three inner solvers: boosted DC (PBDC), classical DC (PDC) and an
// alternating scheme on the duality-gap model in (x, y, u) (PDG). The loop
// stops once |c'(y - y_s)| <= outer_tol for a lower-level solution y_s.

#include "bilevel/dc.hpp"
#include "bilevel/stationarity.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace bilevel {

enum class Method { PBDC, PDC, PDG };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::PBDC: return "PBDC";
    case Method::PDC: return "PDC";
    case Method::PDG: return "PDG";
  }
  return "?";
}

/// Case-insensitive: pbdc, pdc, pdg.
inline Method parse_method(std::string_view s) {
  std::string low(s);
  for (auto& ch : low) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (low == "pbdc") return Method::PBDC;
  if (low == "pdc") return Method::PDC;
  if (low == "pdg") return Method::PDG;
  throw ParseError("method", "unknown method '" + std::string(s) + "'");
}

struct PdgParams {
  double tol = 1e-8;               // objective change between alternations
  std::size_t max_alternations = 50;
};

/// Continuation of the DC iteration at the final sigma once the outer test
/// has fired; the inner tolerance 1e-4 alone leaves O(rho |z - w|) in the
/// stationarity system.
struct PolishParams {
  bool enabled = true;
  double tol = 1e-9;
  std::size_t cap = 500;
};

struct PenaltyParams {
  double sigma0 = 1.0;
  double gamma = 1.2;
  double outer_tol = 1e-7;
  std::size_t outer_cap = 200;
  std::size_t inner_cap = 100;
  double inner_tol = 1e-4;
  LineSearchParams line_search;
  PdgParams pdg;
  PolishParams polish;
  bool keep_trace = false;  // retain every DC step in the report

  void validate() const {
    if (!(sigma0 > 0.0)) throw DomainError("sigma0 must be > 0");
    if (!(gamma > 1.0)) throw DomainError("gamma must be > 1");
    if (!(outer_tol >= 0.0) || !(inner_tol >= 0.0)) throw DomainError("tolerances must be >= 0");
    if (!(line_search.beta > 0.0 && line_search.beta < 1.0))
      throw DomainError("line-search beta must lie in (0, 1)");
    if (!(line_search.alpha > 0.0) || !(line_search.step0 > 0.0))
      throw DomainError("line-search alpha and step0 must be > 0");
  }

  /// Assign one parameter from its textual key; used by --params k=v.
  void set(const std::string& key, const std::string& value) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(key, "not a number: '" + value + "'");
    }
    auto count = [&]() {
      if (v < 0.0 || v != std::floor(v)) throw ParseError(key, "expected a nonnegative integer");
      return static_cast<std::size_t>(v);
    };
    if (key == "sigma0") sigma0 = v;
    else if (key == "gamma") gamma = v;
    else if (key == "outer_tol") outer_tol = v;
    else if (key == "outer_cap") outer_cap = count();
    else if (key == "inner_cap") inner_cap = count();
    else if (key == "inner_tol") inner_tol = v;
    else if (key == "ls_step0") line_search.step0 = v;
    else if (key == "ls_alpha") line_search.alpha = v;
    else if (key == "ls_beta") line_search.beta = v;
    else if (key == "ls_trials") line_search.max_trials = static_cast<int>(count());
    else if (key == "pdg_tol") pdg.tol = v;
    else if (key == "pdg_max_alt") pdg.max_alternations = count();
    else if (key == "polish") polish.enabled = v != 0.0;
    else if (key == "polish_tol") polish.tol = v;
    else if (key == "polish_cap") polish.cap = count();
    else throw ParseError(key, "unknown parameter");
  }
};

/// Compact record of one inner DC step; enough to replay the descent tests.
struct InnerStep {
  std::size_t outer = 0;
  double sigma = 0.0;
  double phi_w = 0.0;
  double phi_z = 0.0;
  double phi_next = 0.0;
  double d_norm = 0.0;
  double step = 0.0;
};

struct RunReport {
  Method method = Method::PBDC;
  Vector start;
  Vector x, y;
  double final_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t outer_iters = 0;
  std::size_t total_inner_iters = 0;
  std::size_t polish_iters = 0;  // not part of total_inner_iters
  double final_gap = std::numeric_limits<double>::quiet_NaN();
  double stationarity_residual = std::numeric_limits<double>::quiet_NaN();
  bool terminated = false;
  double sigma_final = 0.0;
  double wall_ms = 0.0;

  std::vector<double> sigma_history;          // sigma used at each outer iteration
  std::vector<std::size_t> inner_counts;      // inner iterations per outer iteration
  std::vector<InnerStep> steps;               // every DC step (PBDC/PDC)
  std::vector<std::vector<DCTraceEntry>> traces;  // full traces when keep_trace
  std::optional<StationarityCertificate> certificate;
  std::string error;                          // nonempty when the run threw
};

/// The sigma of outer iteration k (0-based).
inline double penalty_sigma(const PenaltyParams& p, std::size_t k) {
  return p.sigma0 * std::pow(p.gamma, static_cast<double>(k));
}

/// u0 = argmin { e'u : B'u = -c, u >= 0 }.
inline Vector init_dual(const BilevelInstance& inst) {
  const Eigen::Index p = inst.p();
  AffineSystem sys(-Matrix::Identity(p, p), Vector::Zero(p), inst.lower.B.transpose(),
                   -inst.lower.c);
  const LPSolution s = solve_lp(Vector::Ones(p), sys);
  if (s.status == LpStatus::Infeasible)
    throw DualInfeasible("init_dual: {u : B'u = -c, u >= 0} is empty");
  if (s.status != LpStatus::Optimal)
    throw NumericDegeneracy("init_dual: LP did not reach an optimum");
  return s.x.cwiseMax(0.0);
}

struct PdgPoint {
  Vector w;  // (x, y)
  Vector u;
  std::size_t alternations = 0;
  std::vector<double> objective;  // model value after each alternation
};

/// f(w) + sigma (c'y + (b - Ax)'u); nonnegative gap part for dual-feasible u.
inline double pdg_objective(const BilevelInstance& inst, double sigma, const Vector& w,
                            const Vector& u) {
  const Vector x = inst.x_of(w);
  return inst.objective.value(w) +
         sigma * (inst.lower.c.dot(inst.y_of(w)) + (inst.lower.b - inst.lower.A * x).dot(u));
}

/// Proximal alternating minimisation of the bilinear duality-gap model: a
/// strongly convex QP in (x, y) with u fixed, then an LP in u.
inline PdgPoint pdg_subproblem(const BilevelInstance& inst, double sigma, const Vector& w0,
                               const Vector& u0, const PdgParams& params = {},
                               double rho = -1.0) {
  const Eigen::Index p = inst.p(), n = inst.n(), N = inst.dim();
  const AffineSystem Z = inst.feasible_set();
  const AffineSystem U(-Matrix::Identity(p, p), Vector::Zero(p), inst.lower.B.transpose(),
                       -inst.lower.c);
  if (u0.size() != p) throw DimensionError("pdg_subproblem: |u| != p");
  if (!U.feasible(u0, 1e-7)) throw DualInfeasible("pdg_subproblem: warm u is not dual feasible");
  if (rho < 0.0) rho = dc_split(inst.objective).rho;

  const Matrix Q = 0.5 * (inst.objective.Q + inst.objective.Q.transpose());
  const Matrix H = Q + rho * Matrix::Identity(N, N);
  QpOptions qopt;
  qopt.check_spd = false;

  PdgPoint out{w0, u0, 0, {}};
  double prev = pdg_objective(inst, sigma, w0, u0);
  for (std::size_t a = 0; a < params.max_alternations; ++a) {
    ++out.alternations;
    Vector lin = inst.objective.q - rho * out.w;
    lin.head(n) -= sigma * (inst.lower.A.transpose() * out.u);
    lin.tail(inst.m()) += sigma * inst.lower.c;
    const QPSolution qs = solve_qp(H, lin, Z, out.w, qopt);
    if (qs.status != QpStatus::Optimal)
      throw InfeasibleProblem("pdg_subproblem: feasible polyhedron is empty");
    out.w = qs.x;

    const Vector slack = inst.lower.b - inst.lower.A * inst.x_of(out.w);
    const LPSolution ls = solve_lp(slack, U);
    if (ls.status == LpStatus::Infeasible) throw DualInfeasible("pdg_subproblem: dual set empty");
    if (ls.status != LpStatus::Optimal)
      throw NumericDegeneracy("pdg_subproblem: dual LP did not reach an optimum");
    // Keep u when it is already optimal so that fixed points do not drift.
    if (ls.objective < slack.dot(out.u) - 1e-12) out.u = ls.x.cwiseMax(0.0);

    const double val = pdg_objective(inst, sigma, out.w, out.u);
    out.objective.push_back(val);
    if (std::abs(prev - val) <= params.tol) break;
    prev = val;
  }
  return out;
}

namespace detail {

inline void fill_final(const BilevelInstance& inst, RunReport& r, const Vector& w,
                       double gap) {
  r.x = inst.x_of(w);
  r.y = inst.y_of(w);
  r.final_value = inst.upper_value(w);
  r.final_gap = gap;
}

/// |c'(y - y_s)| with y_s from a fresh lower-level solve.
inline double outer_gap(const BilevelInstance& inst, const Vector& w) {
  const Vector x = inst.x_of(w);
  const Vector ys = lower_level_solve(inst.lower, x);
  return std::abs(inst.lower.c.dot(inst.y_of(w) - ys));
}

}  // namespace detail

inline RunReport run_penalty(const BilevelInstance& inst, const Vector& start, Method method,
                             const PenaltyParams& params = {}) {
  params.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunReport r;
  r.method = method;
  r.start = start;
  if (start.size() != inst.dim()) throw DimensionError("run_penalty: |start| != n + m");
  if (!inst.feasible_set().feasible(start, 1e-9))
    throw InfeasibleStart("run_penalty: start is not in Z_u ∩ Z_l");

  const DCDecomposition base = dc_split(inst.objective);
  DCOptions dopt;
  dopt.tol = params.inner_tol;
  dopt.max_iterations = params.inner_cap;
  dopt.line_search = params.line_search;
  const DCVariant variant = method == Method::PDC ? DCVariant::Classical : DCVariant::Boosted;

  Vector w = start;
  Vector u;
  if (method == Method::PDG) u = init_dual(inst);
  double gap = std::numeric_limits<double>::infinity();
  double sigma = params.sigma0;
  std::size_t k = 0;

  try {
    for (; k < params.outer_cap; ++k) {
      sigma = penalty_sigma(params, k);
      r.sigma_history.push_back(sigma);
      std::size_t inner = 0;
      if (method == Method::PDG) {
        const PdgPoint pt = pdg_subproblem(inst, sigma, w, u, params.pdg, base.rho);
        w = pt.w;
        u = pt.u;
        inner = pt.alternations;
      } else {
        const DCDecomposition dec = with_penalty(base, sigma, inst.lower);
        DCState st = solve_dc(inst, dec, w, variant, dopt);
        w = st.w;
        inner = st.iterations;
        for (const auto& e : st.trace)
          r.steps.push_back({k, sigma, e.phi_w, e.phi_z, e.phi_next, e.d_norm, e.step});
        if (params.keep_trace) r.traces.push_back(std::move(st.trace));
      }
      r.inner_counts.push_back(inner);
      r.total_inner_iters += inner;
      gap = detail::outer_gap(inst, w);
      if (gap <= params.outer_tol) {
        r.terminated = true;
        ++k;
        break;
      }
    }
    r.outer_iters = k;
    r.sigma_final = sigma;

    if (r.terminated && method != Method::PDG && params.polish.enabled) {
      DCOptions popt = dopt;
      popt.tol = params.polish.tol;
      popt.max_iterations = params.polish.cap;
      const DCDecomposition dec = with_penalty(base, sigma, inst.lower);
      const DCState st = solve_dc(inst, dec, w, variant, popt);
      const double pgap = detail::outer_gap(inst, st.w);
      r.polish_iters = st.iterations;
      // The polished point is kept only if it still passes the outer test.
      if (pgap <= params.outer_tol) {
        w = st.w;
        gap = pgap;
      }
    }
    detail::fill_final(inst, r, w, gap);
    if (method != Method::PDG || r.terminated) {
      r.certificate = stationarity_residual(inst, r.x, r.y);
      r.stationarity_residual = r.certificate->residual;
    }
  } catch (const Error& e) {
    throw Error(std::string("run_penalty(") + to_string(method) + ", outer " +
                std::to_string(k) + ", sigma " + std::to_string(sigma) + "): " + e.what());
  }
  r.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace bilevel
