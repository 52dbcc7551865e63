// bilevel: solve / bench / profile front end.
//
// Exit status: 0 success, 1 solver or I/O error, 2 usage or parse error.

#include "bilevel/bilevel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

using namespace bilevel;

constexpr int kSolverError = 1;
constexpr int kUsageError = 2;

PenaltyParams params_from(const std::vector<std::string>& kv) {
  PenaltyParams p;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError("params", "expected key=value, got '" + item + "'");
    p.set(item.substr(0, eq), item.substr(eq + 1));
  }
  p.validate();
  return p;
}

std::vector<Method> methods_from(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& group : names) {
    std::stringstream ss(group);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!name.empty()) out.push_back(parse_method(name));
  }
  if (out.empty()) throw ParseError("methods", "no method given");
  return out;
}

nlohmann::json report_json(const BilevelInstance& inst, const RunReport& r) {
  nlohmann::json j;
  j["instance"] = inst.name;
  j["method"] = to_string(r.method);
  j["start"] = to_std(r.start);
  j["x"] = to_std(r.x);
  j["y"] = to_std(r.y);
  j["final_value"] = r.final_value;
  if (inst.f_star) j["f_star"] = *inst.f_star;
  j["outer_iters"] = r.outer_iters;
  j["total_inner_iters"] = r.total_inner_iters;
  j["polish_iters"] = r.polish_iters;
  j["final_gap"] = r.final_gap;
  j["stationarity_residual"] = r.stationarity_residual;
  j["terminated"] = r.terminated;
  j["sigma_final"] = r.sigma_final;
  j["wall_ms"] = r.wall_ms;
  return j;
}

struct SolveArgs {
  std::string instance;
  std::string method = "pbdc";
  std::uint64_t seed = 0;
  std::vector<std::string> params;
};

int cmd_solve(const SolveArgs& a) {
  const BilevelInstance inst = load_instance(a.instance);
  const Method m = parse_method(a.method);
  const PenaltyParams p = params_from(a.params);
  const Vector start = random_starts(inst, 1, a.seed).front();
  const RunReport r = run_penalty(inst, start, m, p);
  std::cout << report_json(inst, r).dump(2) << '\n';
  return 0;
}

struct BenchArgs {
  std::string instance;
  std::vector<std::string> methods{"pbdc,pdc,pdg"};
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::string out = "bench_out";
  unsigned workers = 0;
  bool deterministic = false;
  bool log_tau = false;
  std::vector<std::string> params;
  std::optional<double> theta_fval;
  double theta_outer = 1.0, theta_gap = 1e-6, theta_inner = 1.0;
};

int cmd_bench(const BenchArgs& a) {
  const BilevelInstance inst = load_instance(a.instance);
  BenchOptions opts;
  opts.params = params_from(a.params);
  opts.workers = a.workers;
  opts.deterministic = a.deterministic;
  const BenchTable t = run_benchmark(inst, methods_from(a.methods), a.runs, a.seed, opts);

  std::vector<std::vector<ProfileCurve>> curves;
  if (!t.rows.empty()) {
    // Without a known optimum the best terminated value stands in for f*.
    double fstar = inst.f_star.value_or(std::numeric_limits<double>::infinity());
    if (!inst.f_star)
      for (const auto& r : t.rows)
        if (r.terminated) fstar = std::min(fstar, r.fval);
    if (!std::isfinite(fstar)) fstar = 0.0;
    curves.push_back(performance_profile(t, Metric::Fval, a.theta_fval.value_or(inst.fval_offset), fstar));
    curves.push_back(performance_profile(t, Metric::Outer, a.theta_outer, 0.0));
    curves.push_back(performance_profile(t, Metric::Gap, a.theta_gap, 0.0));
    curves.push_back(performance_profile(t, Metric::Inner, a.theta_inner, 0.0));
  }
  emit_reports(t, curves, a.out, {a.log_tau});

  std::size_t failed = 0;
  for (const auto& r : t.rows)
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "run " << to_string(r.method) << " start " << r.start << ": " << r.error << '\n';
    }
  std::cout << summary_csv(t);
  if (t.rows.empty()) std::cout << "no runs requested; no profiles written\n";
  std::cout << "wrote " << t.rows.size() << " rows to " << a.out << "/results.csv";
  if (failed) std::cout << " (" << failed << " failed)";
  std::cout << '\n';
  return 0;
}

struct ProfileArgs {
  std::string in;
  std::string metric = "fval";
  double offset = 0.0;
  double pistar = 0.0;
  std::string out = ".";
  bool log_tau = false;
};

int cmd_profile(const ProfileArgs& a) {
  const Metric metric = parse_metric(a.metric);
  const BenchTable t = read_results_csv(a.in);
  const auto curves = performance_profile(t, metric, a.offset, a.pistar);
  emit_profile(curves, a.out, {a.log_tau});
  for (const auto& c : curves) {
    std::cout << to_string(c.method) << ": rho(1) = " << fmt_double(c.rho(1.0))
              << ", final rho = " << fmt_double(c.breakpoints.back().second);
    if (c.dropped) std::cout << " (" << c.dropped << " starts dropped: every method failed)";
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty-DC solver for optimistic bilevel programs"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "solve one instance from a seeded random start");
  solve->add_option("--instance", sa.instance, "built-in name (ex1, ex2, ex3, ex3-consistent) or JSON path")
      ->required();
  solve->add_option("--method", sa.method, "pbdc, pdc or pdg");
  solve->add_option("--seed", sa.seed, "start seed");
  solve->add_option("--params", sa.params, "overrides as key=value");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "run methods over seeded random starts");
  bench->add_option("--instance", ba.instance, "built-in name or JSON path")->required();
  bench->add_option("--methods", ba.methods, "comma separated, e.g. pbdc,pdc,pdg");
  bench->add_option("--runs", ba.runs, "number of random starts");
  bench->add_option("--seed", ba.seed, "start seed");
  bench->add_option("--out", ba.out, "output directory");
  bench->add_option("--workers", ba.workers, "worker threads (0: all cores)");
  bench->add_flag("--deterministic", ba.deterministic, "write wall_ms = 0 for byte-stable output");
  bench->add_flag("--log-tau", ba.log_tau, "log-scaled tau axis in SVGs");
  bench->add_option("--params", ba.params, "overrides as key=value");
  bench->add_option("--theta-fval", ba.theta_fval, "fval offset (default: per instance)");
  bench->add_option("--theta-outer", ba.theta_outer, "outer-iteration offset");
  bench->add_option("--theta-gap", ba.theta_gap, "duality-gap offset");
  bench->add_option("--theta-inner", ba.theta_inner, "inner-iteration offset");

  ProfileArgs pa;
  auto* prof = app.add_subcommand("profile", "performance profile from results.csv");
  prof->add_option("--in", pa.in, "results.csv")->required();
  prof->add_option("--metric", pa.metric, "fval, outer, gap or inner");
  prof->add_option("--offset", pa.offset, "theta");
  prof->add_option("--pistar", pa.pistar, "reference value (f* for fval, else 0)");
  prof->add_option("--out", pa.out, "output directory");
  prof->add_flag("--log-tau", pa.log_tau, "log-scaled tau axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*solve) return cmd_solve(sa);
    if (*bench) return cmd_bench(ba);
    return cmd_profile(pa);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverError;
  }
}
