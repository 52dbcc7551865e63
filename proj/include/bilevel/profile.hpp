#pragma once

// Performance profiles over a BenchTable. For start s and method a,
//
//   Q(a, s) = pi(a, s) - pi_star + theta   if run (a, s) terminated,   +inf otherwise
//   r(a, s) = Q(a, s) / min_b Q(b, s)
//   rho_a(tau) = |{s : r(a, s) <= tau}| / |S|
//
// Starts on which every method failed are dropped from S.

#include "bilevel/bench.hpp"

#include <limits>
#include <map>

namespace bilevel {

enum class Metric { Fval, Outer, Gap, Inner };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::Fval: return "fval";
    case Metric::Outer: return "outer";
    case Metric::Gap: return "gap";
    case Metric::Inner: return "inner";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "fval") return Metric::Fval;
  if (s == "outer") return Metric::Outer;
  if (s == "gap") return Metric::Gap;
  if (s == "inner") return Metric::Inner;
  throw ParseError("metric", "expected fval, outer, gap or inner, got '" + s + "'");
}

inline double metric_value(const BenchRow& r, Metric m) {
  switch (m) {
    case Metric::Fval: return r.fval;
    case Metric::Outer: return static_cast<double>(r.outer);
    case Metric::Gap: return r.gap;
    case Metric::Inner: return static_cast<double>(r.inner);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct ProfileCurve {
  Method method = Method::PBDC;
  Metric metric = Metric::Fval;
  double offset = 0.0;
  std::vector<std::pair<double, double>> breakpoints;  // (tau, rho), tau ascending
  std::vector<double> ratios;  // r(a, s) per retained start, +inf for failures
  std::size_t starts = 0;      // |S| after dropping all-fail starts
  std::size_t dropped = 0;

  /// rho(tau); 0 left of the first breakpoint.
  double rho(double tau) const {
    double out = 0.0;
    for (const auto& [t, r] : breakpoints) {
      if (t > tau) break;
      out = r;
    }
    return out;
  }
};

/// pi_star is the reference value subtracted from pi (f_star for fval, 0
/// otherwise). A negative pi - pi_star is clamped to 0. When min_b Q(b, s) = 0
/// the methods attaining it get ratio 1 and the rest +inf.
inline std::vector<ProfileCurve> performance_profile(const BenchTable& table, Metric metric,
                                                     double offset, double pi_star) {
  if (table.rows.empty()) throw EmptyTable("performance_profile: no rows");
  if (!(offset >= 0.0)) throw DomainError("performance_profile: offset must be >= 0");
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<Method> methods = table.methods;
  if (methods.empty())
    for (const auto& r : table.rows)
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
        methods.push_back(r.method);

  // Q per (start, method index)
  std::map<std::size_t, std::vector<double>> Q;
  for (const auto& r : table.rows) {
    const auto it = std::find(methods.begin(), methods.end(), r.method);
    if (it == methods.end()) continue;
    auto& slot = Q.try_emplace(r.start, methods.size(), inf).first->second;
    const double v = metric_value(r, metric);
    if (r.terminated && std::isfinite(v))
      slot[static_cast<std::size_t>(it - methods.begin())] = std::max(v - pi_star, 0.0) + offset;
  }

  std::vector<ProfileCurve> curves(methods.size());
  for (std::size_t a = 0; a < methods.size(); ++a) {
    curves[a].method = methods[a];
    curves[a].metric = metric;
    curves[a].offset = offset;
  }
  for (const auto& [s, q] : Q) {
    const double best = *std::min_element(q.begin(), q.end());
    if (best == inf) {
      for (auto& c : curves) ++c.dropped;
      continue;
    }
    for (std::size_t a = 0; a < q.size(); ++a) {
      double r = inf;
      if (q[a] != inf) r = best > 0.0 ? q[a] / best : (q[a] == 0.0 ? 1.0 : inf);
      curves[a].ratios.push_back(r);
    }
  }
  for (auto& c : curves) {
    c.starts = c.ratios.size();
    std::vector<double> finite;
    for (double r : c.ratios)
      if (r != inf) finite.push_back(r);
    std::sort(finite.begin(), finite.end());
    const double denom = static_cast<double>(c.starts);
    for (std::size_t i = 0; i < finite.size(); ++i) {
      if (i + 1 < finite.size() && finite[i + 1] == finite[i]) continue;
      c.breakpoints.emplace_back(finite[i], static_cast<double>(i + 1) / denom);
    }
    if (c.breakpoints.empty()) c.breakpoints.emplace_back(1.0, 0.0);
  }
  return curves;
}

/// Checks tau ascending, rho nondecreasing and within [0, 1], and that the
/// last rho equals the fraction of finite ratios.
inline bool profile_invariants_hold(const ProfileCurve& c) {
  double prev_t = -std::numeric_limits<double>::infinity();
  double prev_r = 0.0;
  for (const auto& [t, r] : c.breakpoints) {
    if (!(t > prev_t) || r < prev_r || r < 0.0 || r > 1.0) return false;
    prev_t = t;
    prev_r = r;
  }
  std::size_t ok = 0;
  for (double r : c.ratios)
    if (std::isfinite(r)) ++ok;
  const double frac = c.starts ? static_cast<double>(ok) / static_cast<double>(c.starts) : 0.0;
  return c.breakpoints.back().second == frac;
}

}  // namespace bilevel
