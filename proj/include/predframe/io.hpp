#pragma once

#include "predframe/estimate.hpp"
#include "predframe/interval.hpp"
#include "predframe/types.hpp"
#include "predframe/verify.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace predframe {

inline constexpr int kSchemaVersion = 1;

struct ParseError : StructuralError {
  ParseError(std::size_t line, const std::string& what)
      : StructuralError("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

// CSV ----------------------------------------------------------------------

/// Shortest-safe decimal form: 17 significant digits, so values round-trip exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads a CSV with a header row containing `t` and the value column.
/// `t` must be an integer increasing by exactly 1 from row to row.
inline Series read_series(std::istream& in, const std::string& column = "x") {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  ++lineno;
  const auto header = detail::split_csv_line(line);
  long ti = -1, xi = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "t") ti = static_cast<long>(i);
    if (header[i] == column) xi = static_cast<long>(i);
  }
  if (ti < 0) throw ParseError(1, "header has no 't' column");
  if (xi < 0) throw ParseError(1, "header has no '" + column + "' column");

  std::vector<double> xs;
  long t0 = 0, prev = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(cells.size()));
    }
    long t = 0;
    if (!detail::parse_number(cells[static_cast<std::size_t>(ti)], t)) {
      throw ParseError(lineno, "t is not an integer: '" + cells[static_cast<std::size_t>(ti)] + "'");
    }
    double x = 0;
    const auto& xs_cell = cells[static_cast<std::size_t>(xi)];
    if (!detail::parse_number(xs_cell, x) || !std::isfinite(x)) {
      throw ParseError(lineno, column + " is not a finite number: '" + xs_cell + "'");
    }
    if (xs.empty()) {
      t0 = t;
    } else if (t != prev + 1) {
      throw ParseError(lineno, "t jumps from " + std::to_string(prev) + " to " + std::to_string(t));
    }
    prev = t;
    xs.push_back(x);
  }
  if (xs.empty()) throw ParseError(lineno, "empty series: no data rows");
  return Series(std::move(xs), t0);
}

inline Series load_series(const std::string& path, const std::string& column = "x") {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open '" + path + "'");
  return read_series(in, column);
}

inline void write_series(std::ostream& out, const Series& s) {
  out << "t,x\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << (s.t0() + static_cast<long>(i)) << ',' << format_double(s.values()[i]) << '\n';
  }
}

inline void write_decay_table(std::ostream& out, const std::vector<DecayRow>& rows) {
  out << "t1,gap\n";
  for (const auto& r : rows) out << r.t1 << ',' << format_double(r.gap) << '\n';
}

inline void write_coverage_table(std::ostream& out, const CoverageReport& rep) {
  out << "scheme,coverage,avg_half_width,reps_used,failures,clamped\n";
  for (const auto& s : rep.schemes) {
    out << to_string(s.scheme) << ',' << format_double(s.coverage) << ','
        << format_double(s.avg_half_width) << ',' << s.reps_used << ',' << s.failures << ','
        << s.clamped << '\n';
  }
}

// JSON ---------------------------------------------------------------------

using nlohmann::json;

inline json to_json_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json_matrix(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json_vector(m.row(i).transpose()));
  return a;
}

/// Parameter estimates appear both as `theta_hat` and as `<name>_hat` fields.
inline json to_json(const EstimationResult& r, std::size_t T) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = std::string(to_string(r.theta_hat.kind()));
  j["T"] = T;
  const auto names = param_names(r.theta_hat.kind());
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i] + "_hat"] = r.theta_hat[i];
  j["theta_hat"] = to_json_vector(r.theta_hat.values());
  j["upsilon_hat"] = to_json_matrix(r.upsilon_hat);
  if (r.sigma_eps2_hat) j["sigma_eps2_hat"] = *r.sigma_eps2_hat;
  if (r.kurtosis_hat) j["kurtosis_hat"] = *r.kurtosis_hat;
  j["objective"] = r.objective;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["clamped"] = r.clamped;
  j["near_common_root"] = r.near_common_root;
  return j;
}

inline json to_json(const ConfidenceInterval& ci, ModelKind kind) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = std::string(to_string(kind));
  j["scheme"] = std::string(to_string(ci.scheme));
  j["level"] = ci.level;
  j["center"] = ci.center;
  j["lower"] = ci.lower();
  j["upper"] = ci.upper();
  j["half_width"] = ci.half_width;
  j["v_hat"] = ci.v_hat;
  j["scale"] = ci.scale;
  j["clamped"] = ci.clamped;
  j["theta_hat"] = to_json_vector(ci.theta_hat);
  if (ci.T_E) j["T_E"] = *ci.T_E;
  if (ci.T_P) j["T_P"] = *ci.T_P;
  return j;
}

inline json to_json(const CoverageReport& rep, const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = std::string(to_string(cfg.kind()));
  j["theta0"] = to_json_vector(cfg.theta0.values());
  j["T"] = cfg.T;
  j["reps"] = cfg.reps;
  j["seed"] = cfg.seed;
  j["level"] = cfg.level;
  json schemes = json::array();
  for (const auto& s : rep.schemes) {
    schemes.push_back({{"scheme", std::string(to_string(s.scheme))},
                       {"coverage", s.coverage},
                       {"avg_half_width", s.avg_half_width},
                       {"reps_used", s.reps_used},
                       {"failures", s.failures},
                       {"clamped", s.clamped}});
  }
  j["schemes"] = schemes;
  json diag;
  diag["gradient_check_max_err"] =
      rep.gradient_check_max_err ? json(*rep.gradient_check_max_err) : json(nullptr);
  json decay = json::array();
  for (const auto& r : rep.decay_table) decay.push_back({{"t1", r.t1}, {"gap", r.gap}});
  diag["decay_table"] = decay;
  diag["ks_statistic"] = rep.ks_statistic ? json(*rep.ks_statistic) : json(nullptr);
  j["diagnostics"] = diag;
  return j;
}

}  // namespace predframe
