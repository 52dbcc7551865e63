#pragma once

// Instances (built-in and JSON), reproducible feasible starts and the batch
// runner behind `bench`.

#include "bilevel/penalty.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

namespace bilevel {

inline std::vector<std::string> builtin_names() { return {"ex1", "ex2", "ex3", "ex3-consistent"}; }

inline std::optional<BilevelInstance> builtin_instance(const std::string& name) {
  if (name == "ex1") return builtin::linear_ex1();
  if (name == "ex2") return builtin::quadratic_ex2();
  if (name == "ex3") return builtin::inverse_transportation();
  if (name == "ex3-consistent") return builtin::inverse_transportation_consistent();
  return std::nullopt;
}

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(key, "missing key");
  return doc.at(key);
}

inline double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ParseError(field, "expected a number");
  return v.get<double>();
}

inline Vector parse_vector(const json& v, const std::string& field) {
  if (!v.is_array()) throw ParseError(field, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = as_number(v[i], field + "[" + std::to_string(i) + "]");
  return out;
}

/// Row-major nested arrays; an empty array is a 0 x cols matrix.
inline Matrix parse_matrix(const json& v, const std::string& field, Eigen::Index cols) {
  if (!v.is_array()) throw ParseError(field, "expected an array of rows");
  if (v.empty()) return Matrix::Zero(0, std::max<Eigen::Index>(cols, 0));
  const std::size_t width = v[0].is_array() ? v[0].size() : 0;
  Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string row = field + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != width)
      throw ParseError(row, "rows must be arrays of equal length " + std::to_string(width));
    for (std::size_t j = 0; j < width; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          as_number(v[i][j], row + "[" + std::to_string(j) + "]");
  }
  return out;
}

inline void expect(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ParseError(field, what);
}

}  // namespace detail

/// Keys A, B, b, C, D, d, c, Q, q, const, start_box, f_star (null allowed);
/// optional name and fval_offset. start_box is [lo, hi] for every
/// coordinate or one [lo, hi] pair per coordinate of (x, y).
inline BilevelInstance parse_instance_json(const std::string& text,
                                           const std::string& default_name = "instance") {
  using detail::expect;
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
  if (!doc.is_object()) throw ParseError("<document>", "expected a JSON object");

  BilevelInstance in;
  in.name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>()
                                                             : default_name;
  in.lower.A = detail::parse_matrix(detail::require(doc, "A"), "A", 0);
  const Eigen::Index p = in.lower.A.rows();
  expect(p > 0 || in.lower.A.cols() == 0, "A", "empty");
  const Eigen::Index n = in.lower.A.cols();
  in.lower.B = detail::parse_matrix(detail::require(doc, "B"), "B", 0);
  const Eigen::Index m = in.lower.B.cols();
  expect(n > 0, "A", "needs at least one column (x)");
  expect(m > 0, "B", "needs at least one column (y)");
  expect(in.lower.B.rows() == p, "B", "row count differs from A");
  in.lower.b = detail::parse_vector(detail::require(doc, "b"), "b");
  expect(in.lower.b.size() == p, "b", "length differs from the rows of A");
  in.lower.c = detail::parse_vector(detail::require(doc, "c"), "c");
  expect(in.lower.c.size() == m, "c", "length differs from the columns of B");

  in.C = detail::parse_matrix(detail::require(doc, "C"), "C", n);
  const Eigen::Index q = in.C.rows();
  expect(in.C.cols() == n, "C", "column count differs from A");
  in.D = detail::parse_matrix(detail::require(doc, "D"), "D", m);
  expect(in.D.rows() == q, "D", "row count differs from C");
  expect(in.D.cols() == m, "D", "column count differs from B");
  in.d = detail::parse_vector(detail::require(doc, "d"), "d");
  expect(in.d.size() == q, "d", "length differs from the rows of C");

  const Eigen::Index N = n + m;
  in.objective.Q = detail::parse_matrix(detail::require(doc, "Q"), "Q", N);
  expect(in.objective.Q.rows() == N && in.objective.Q.cols() == N, "Q",
         "must be (n+m) x (n+m) = " + std::to_string(N) + " x " + std::to_string(N));
  in.objective.q = detail::parse_vector(detail::require(doc, "q"), "q");
  expect(in.objective.q.size() == N, "q", "length must be n+m = " + std::to_string(N));
  in.objective.constant = detail::as_number(detail::require(doc, "const"), "const");
  {
    const Matrix& Q = in.objective.Q;
    const double scale = 1.0 + Q.cwiseAbs().maxCoeff();
    expect((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "Q", "not symmetric");
  }

  const auto& box = detail::require(doc, "start_box");
  expect(box.is_array() && !box.empty(), "start_box", "expected [lo, hi] or a list of pairs");
  in.box_lo.resize(N);
  in.box_hi.resize(N);
  if (box[0].is_number()) {
    expect(box.size() == 2, "start_box", "expected [lo, hi]");
    in.box_lo.setConstant(detail::as_number(box[0], "start_box[0]"));
    in.box_hi.setConstant(detail::as_number(box[1], "start_box[1]"));
  } else {
    expect(static_cast<Eigen::Index>(box.size()) == N, "start_box",
           "needs one [lo, hi] pair per coordinate of (x, y)");
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto& pr = box[static_cast<std::size_t>(i)];
      const std::string f = "start_box[" + std::to_string(i) + "]";
      expect(pr.is_array() && pr.size() == 2, f, "expected [lo, hi]");
      in.box_lo(i) = detail::as_number(pr[0], f);
      in.box_hi(i) = detail::as_number(pr[1], f);
    }
  }
  expect((in.box_hi - in.box_lo).minCoeff() >= 0.0, "start_box", "lo > hi");

  const auto& fs = detail::require(doc, "f_star");
  if (!fs.is_null()) in.f_star = detail::as_number(fs, "f_star");
  if (doc.contains("fval_offset")) in.fval_offset = detail::as_number(doc["fval_offset"], "fval_offset");

  in.validate();
  return in;
}

/// A built-in name or a path to a JSON instance file.
inline BilevelInstance load_instance(const std::string& source) {
  if (auto b = builtin_instance(source)) return *b;
  std::ifstream f(source);
  if (!f) throw ParseError(source, "not a built-in instance and not a readable file");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string stem = source;
  if (auto slash = stem.find_last_of("/\\"); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (auto dot = stem.rfind('.'); dot != std::string::npos && dot > 0) stem.resize(dot);
  return parse_instance_json(ss.str(), stem);
}

/// Uniform on [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Draws uniform points in the start box (coordinates in order, points in
/// order, one mt19937_64 stream) and projects each onto Z_u ∩ Z_l.
inline std::vector<Vector> random_starts(const BilevelInstance& inst, std::size_t count,
                                         std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const AffineSystem Z = inst.feasible_set();
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Vector w(inst.dim());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w(i) = inst.box_lo(i) + unit_uniform(eng) * (inst.box_hi(i) - inst.box_lo(i));
    Vector s = Z.feasible(w, 0.0) ? w : project_polyhedron(w, Z);
    if (!Z.feasible(s, 1e-9))
      throw NumericDegeneracy("random_starts: projection left the polyhedron");
    out.push_back(std::move(s));
  }
  return out;
}

/// One results.csv row.
struct BenchRow {
  Method method = Method::PBDC;
  std::size_t start = 0;
  std::uint64_t seed = 0;
  double fval = std::numeric_limits<double>::quiet_NaN();
  std::size_t outer = 0;
  std::size_t inner = 0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double resid = std::numeric_limits<double>::quiet_NaN();
  bool terminated = false;
  double wall_ms = 0.0;

  Vector start_point;  // empty when read back from CSV
  std::string error;
};

struct BenchAggregate {
  Method method = Method::PBDC;
  std::size_t runs = 0;
  std::size_t terminated = 0;
  double avg_fval = std::numeric_limits<double>::quiet_NaN();
  double avg_outer = std::numeric_limits<double>::quiet_NaN();
  double avg_gap = std::numeric_limits<double>::quiet_NaN();
  double avg_inner = std::numeric_limits<double>::quiet_NaN();
};

struct BenchTable {
  std::string instance;
  std::vector<Method> methods;
  std::vector<BenchRow> rows;  // start-major, methods in the order given

  /// Means over terminated runs, accumulated in row order.
  std::vector<BenchAggregate> aggregates() const {
    std::vector<BenchAggregate> out;
    for (Method m : methods) {
      BenchAggregate a;
      a.method = m;
      double f = 0, o = 0, g = 0, in = 0;
      for (const auto& r : rows) {
        if (r.method != m) continue;
        ++a.runs;
        if (!r.terminated) continue;
        ++a.terminated;
        f += r.fval;
        o += static_cast<double>(r.outer);
        g += r.gap;
        in += static_cast<double>(r.inner);
      }
      if (a.terminated) {
        const double t = static_cast<double>(a.terminated);
        a.avg_fval = f / t;
        a.avg_outer = o / t;
        a.avg_gap = g / t;
        a.avg_inner = in / t;
      }
      out.push_back(a);
    }
    return out;
  }
};

struct BenchOptions {
  PenaltyParams params;
  unsigned workers = 0;        // 0: hardware concurrency
  bool deterministic = false;  // report wall_ms = 0 so outputs are byte-stable
  /// Called from worker threads with each finished report (before traces are
  /// dropped); must be thread-safe.
  std::function<void(const BilevelInstance&, const RunReport&)> inspect;
};

inline BenchRow row_from_report(const RunReport& r, std::size_t start, std::uint64_t seed) {
  BenchRow row;
  row.method = r.method;
  row.start = start;
  row.seed = seed;
  row.fval = r.final_value;
  row.outer = r.outer_iters;
  row.inner = r.total_inner_iters;
  row.gap = r.final_gap;
  row.resid = r.stationarity_residual;
  row.terminated = r.terminated;
  row.wall_ms = r.wall_ms;
  row.start_point = r.start;
  return row;
}

inline BenchTable run_benchmark(const BilevelInstance& inst, const std::vector<Method>& methods,
                                std::size_t n_runs, std::uint64_t seed,
                                const BenchOptions& opts = {}) {
  BenchTable table;
  table.instance = inst.name;
  table.methods = methods;
  if (n_runs == 0 || methods.empty()) return table;

  const std::vector<Vector> starts = random_starts(inst, n_runs, seed);
  const std::size_t jobs = n_runs * methods.size();
  table.rows.resize(jobs);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t s = j / methods.size();
      const Method m = methods[j % methods.size()];
      BenchRow row;
      try {
        const RunReport rep = run_penalty(inst, starts[s], m, opts.params);
        if (opts.inspect) opts.inspect(inst, rep);
        row = row_from_report(rep, s, seed);
      } catch (const std::exception& e) {
        row.method = m;
        row.start = s;
        row.seed = seed;
        row.start_point = starts[s];
        row.error = e.what();
      }
      if (opts.deterministic) row.wall_ms = 0.0;
      table.rows[j] = std::move(row);
    }
  };
  unsigned nw = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  nw = static_cast<unsigned>(std::min<std::size_t>(nw, jobs));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nw; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return table;
}

}  // namespace bilevel
