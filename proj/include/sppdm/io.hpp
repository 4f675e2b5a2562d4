#ifndef SPPDM_IO_HPP
#define SPPDM_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/metrics.hpp"
#include "sppdm/netsim.hpp"
#include "sppdm/oracles.hpp"

namespace sppdm {

// Shortest round-tripping decimal form; locale-free, so identical inputs
// serialize to identical bytes.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("bad number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& contents) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << contents;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingData("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --------------------------------------------------------------------------
// Run traces

inline std::string trace_to_csv(const RunTrace& trace) {
  std::string out = "iter,stationarity,consensus,q_gap,phi,ax_norm2,wall_ms\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iteration);
    out += ',';
    out += format_double(r.stationarity);
    out += ',';
    out += format_double(r.consensus);
    out += ',';
    out += format_double(r.q_gap);
    out += ',';
    out += format_double(r.potential);
    out += ',';
    out += format_double(r.constraint_sq);
    out += ',';
    out += format_double(r.wall_ms);
    out += '\n';
  }
  return out;
}

inline RunTrace trace_from_csv(const std::string& text) {
  RunTrace trace;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line))
    throw ParseError("empty trace file");
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7)
      throw ParseError("trace row needs 7 cells, got " +
                       std::to_string(cells.size()));
    TraceRecord r;
    r.iteration = std::stoi(cells[0]);
    r.stationarity = parse_double(cells[1]);
    r.consensus = parse_double(cells[2]);
    r.q_gap = parse_double(cells[3]);
    r.potential = parse_double(cells[4]);
    r.constraint_sq = parse_double(cells[5]);
    r.wall_ms = parse_double(cells[6]);
    trace.records.push_back(r);
  }
  return trace;
}

// --------------------------------------------------------------------------
// Round logs

inline std::string round_log_to_csv(const RoundLog& log) {
  std::string out = "round,messages,scalars\n";
  for (const auto& r : log.rounds) {
    out += std::to_string(r.round);
    out += ',';
    out += std::to_string(r.messages);
    out += ',';
    out += std::to_string(r.scalars);
    out += '\n';
  }
  return out;
}

// --------------------------------------------------------------------------
// Datasets: one file per agent, rows = samples, columns = features then the
// response.

inline void export_dataset(const RegressionDataset& ds,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t a = 0; a < ds.features.size(); ++a) {
    const Mat& h = ds.features[a];
    const Vec& y = ds.responses[a];
    std::string out;
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        out += format_double(h(r, c));
        out += ',';
      }
      out += format_double(y[r]);
      out += '\n';
    }
    write_text_file(dir / ("agent_" + std::to_string(a) + ".csv"), out);
  }
}

inline RegressionDataset import_dataset(const std::filesystem::path& dir,
                                        int agents) {
  RegressionDataset ds;
  for (int a = 0; a < agents; ++a) {
    const auto path = dir / ("agent_" + std::to_string(a) + ".csv");
    std::stringstream ss(read_text_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      std::vector<double> row;
      row.reserve(cells.size());
      for (const auto& c : cells) row.push_back(parse_double(c));
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw MissingData("no samples in " + path.string());
    const auto cols = rows.front().size();
    Mat h(static_cast<Eigen::Index>(rows.size()),
          static_cast<Eigen::Index>(cols - 1));
    Vec y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols)
        throw ParseError("ragged dataset row in " + path.string());
      for (std::size_t c = 0; c + 1 < cols; ++c)
        h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            rows[r][c];
      y[static_cast<Eigen::Index>(r)] = rows[r][cols - 1];
    }
    ds.features.push_back(std::move(h));
    ds.responses.push_back(std::move(y));
  }
  return ds;
}

// --------------------------------------------------------------------------
// Solver-state checkpoint: agents x coordinates.

inline std::string state_to_csv(const Mat& x) {
  std::string out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(x(r, c));
    }
    out += '\n';
  }
  return out;
}

// --------------------------------------------------------------------------
// Flat key-value report (theory constants and friends).

inline std::string theory_report(const TheoryConstants& t) {
  std::string out;
  const auto kv = [&out](const char* k, double v) {
    out += k;
    out += " = ";
    out += format_double(v);
    out += '\n';
  };
  const auto kb = [&out](const char* k, bool v) {
    out += k;
    out += " = ";
    out += v ? "true" : "false";
    out += '\n';
  };
  kv("rho_bound", t.rho_bound);
  kv("sigma1", t.sigma1);
  kv("sigma2", t.sigma2);
  kv("sigma3", t.sigma3);
  kv("sigma4", t.sigma4);
  kv("sigma5", t.sigma5);
  kv("eta_cap", t.eta_cap);
  kv("tau", t.tau);
  kv("s_hat1", t.s_hat1);
  kv("s_hat2", t.s_hat2);
  kv("alpha_cap", t.alpha_cap);
  kv("beta_cap", t.beta_cap);
  kv("k1", t.big_k1);
  kv("k2", t.big_k2);
  kv("k3", t.big_k3);
  kv("k4", t.big_k4);
  kv("c0", t.c0);
  kv("c1", t.c1);
  kb("curvature_ok", t.curvature_ok);
  kb("momentum_ok", t.momentum_ok);
  kb("alpha_ok", t.alpha_ok);
  kb("beta_ok", t.beta_ok);
  kb("feasible", t.feasible);
  if (!t.violated.empty()) {
    out += "violated = ";
    out += t.violated;
    out += '\n';
  }
  return out;
}

// FNV-1a over the iterate bytes; the reproducibility fingerprint of a run.
inline std::string state_checksum(const Mat& x) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double v = x(r, c);
      const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
      for (std::size_t b = 0; b < sizeof(double); ++b) {
        h ^= bytes[b];
        h *= 1099511628211ULL;
      }
    }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace sppdm

#endif  // SPPDM_IO_HPP
