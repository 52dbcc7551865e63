#pragma once

// results.csv / summary.csv / profile_<metric>.svg writers and the
// results.csv reader used by `profile`.

#include "bilevel/profile.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bilevel {

inline constexpr const char* kResultsHeader =
    "method,start,seed,fval,outer,inner,gap,resid,terminated,wall_ms";

inline constexpr const char* kSummaryHeader =
    "method,average function value,average number of outer iterations,"
    "average lower level duality gap,average number of inner iterations";

/// %.17g, so every double read back compares equal.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string results_csv(const BenchTable& t) {
  std::ostringstream os;
  os << kResultsHeader << '\n';
  for (const auto& r : t.rows)
    os << to_string(r.method) << ',' << r.start << ',' << r.seed << ',' << fmt_double(r.fval)
       << ',' << r.outer << ',' << r.inner << ',' << fmt_double(r.gap) << ','
       << fmt_double(r.resid) << ',' << (r.terminated ? 1 : 0) << ',' << fmt_double(r.wall_ms)
       << '\n';
  return os.str();
}

inline std::string summary_csv(const BenchTable& t) {
  std::ostringstream os;
  os << kSummaryHeader << '\n';
  for (const auto& a : t.aggregates())
    os << to_string(a.method) << ',' << fmt_double(a.avg_fval) << ',' << fmt_double(a.avg_outer)
       << ',' << fmt_double(a.avg_gap) << ',' << fmt_double(a.avg_inner) << '\n';
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double csv_double(const std::string& s, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError(field, "not a number: '" + s + "'");
  return v;
}

inline std::uint64_t csv_count(const std::string& s, const std::string& field) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(field, "not a nonnegative integer: '" + s + "'");
  return std::stoull(s);
}

}  // namespace detail

inline BenchTable parse_results_csv(std::istream& in, const std::string& source = "results.csv") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw ParseError(source + ":1", "unexpected header '" + line + "'");
  BenchTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string at = source + ":" + std::to_string(lineno);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 10) throw ParseError(at, "expected 10 columns");
    BenchRow r;
    r.method = parse_method(cells[0]);
    r.start = detail::csv_count(cells[1], at + " start");
    r.seed = detail::csv_count(cells[2], at + " seed");
    r.fval = detail::csv_double(cells[3], at + " fval");
    r.outer = detail::csv_count(cells[4], at + " outer");
    r.inner = detail::csv_count(cells[5], at + " inner");
    r.gap = detail::csv_double(cells[6], at + " gap");
    r.resid = detail::csv_double(cells[7], at + " resid");
    if (cells[8] != "0" && cells[8] != "1") throw ParseError(at + " terminated", "expected 0 or 1");
    r.terminated = cells[8] == "1";
    r.wall_ms = detail::csv_double(cells[9], at + " wall_ms");
    if (std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end())
      t.methods.push_back(r.method);
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline BenchTable read_results_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for reading");
  return parse_results_csv(f, path);
}

struct SvgOptions {
  bool log_tau = false;
  double width = 640, height = 420;
};

/// Step plot of rho(tau) for each curve, with a legend.
inline std::string profile_svg(const std::vector<ProfileCurve>& curves, const std::string& title,
                               const SvgOptions& opt = {}) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  const double L = 60, R = 20, T = 40, B = 50;
  const double pw = opt.width - L - R, ph = opt.height - T - B;

  double tmax = 1.0;
  for (const auto& c : curves)
    for (const auto& [t, r] : c.breakpoints) tmax = std::max(tmax, t);
  if (tmax <= 1.0) tmax = 2.0;
  else tmax *= opt.log_tau ? 2.0 : 1.05;
  auto tx = [&](double t) {
    const double u = opt.log_tau ? std::log10(t) / std::log10(tmax) : (t - 1.0) / (tmax - 1.0);
    return L + pw * u;
  };
  auto ry = [&](double r) { return T + ph * (1.0 - r); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << opt.width
     << "\" height=\"" << opt.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << L + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\">"
     << title << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double r = k / 4.0;
    os << "<text x=\"" << L - 8 << "\" y=\"" << ry(r) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << r << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double t = opt.log_tau ? std::pow(tmax, k / 4.0) : 1.0 + (tmax - 1.0) * k / 4.0;
    char lab[32];
    std::snprintf(lab, sizeof lab, "%.3g", t);
    os << "<text x=\"" << tx(t) << "\" y=\"" << T + ph + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << lab
       << "</text>\n";
  }
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << opt.height - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << (opt.log_tau ? "tau (log scale)" : "tau") << "</text>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const char* col = colors[i % 5];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    double r = 0.0;
    os << tx(1.0) << ',' << ry(0.0);
    for (const auto& [t, rr] : c.breakpoints) {
      os << ' ' << tx(t) << ',' << ry(r) << ' ' << tx(t) << ',' << ry(rr);
      r = rr;
    }
    os << ' ' << tx(tmax) << ',' << ry(r) << "\"/>\n";
    const double ly = T + 16 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << L + pw - 90 << "\" y1=\"" << ly << "\" x2=\"" << L + pw - 66
       << "\" y2=\"" << ly << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << L + pw - 60 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << to_string(c.method) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string profile_csv(const std::vector<ProfileCurve>& curves) {
  std::ostringstream os;
  os << "method,tau,rho\n";
  for (const auto& c : curves)
    for (const auto& [t, r] : c.breakpoints)
      os << to_string(c.method) << ',' << fmt_double(t) << ',' << fmt_double(r) << '\n';
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

/// Writes profile_<metric>.svg and profile_<metric>.csv; returns false (and
/// writes nothing) when there are no curves.
inline bool emit_profile(const std::vector<ProfileCurve>& curves, const std::filesystem::path& dir,
                         const SvgOptions& svg = {}) {
  if (curves.empty()) return false;
  std::filesystem::create_directories(dir);
  const std::string metric = to_string(curves.front().metric);
  char title[96];
  std::snprintf(title, sizeof title, "performance profile: %s (theta = %g)", metric.c_str(),
                curves.front().offset);
  write_file(dir / ("profile_" + metric + ".svg"), profile_svg(curves, title, svg));
  write_file(dir / ("profile_" + metric + ".csv"), profile_csv(curves));
  return true;
}

inline void emit_reports(const BenchTable& table,
                         const std::vector<std::vector<ProfileCurve>>& curves,
                         const std::filesystem::path& dir, const SvgOptions& svg = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "results.csv", results_csv(table));
  write_file(dir / "summary.csv", summary_csv(table));
  for (const auto& c : curves) emit_profile(c, dir, svg);
}

}  // namespace bilevel
