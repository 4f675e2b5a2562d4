#ifndef SPPDM_CONFIG_HPP
#define SPPDM_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/graph.hpp"
#include "sppdm/io.hpp"
#include "sppdm/metrics.hpp"
#include "sppdm/oracles.hpp"
#include "sppdm/solver.hpp"

namespace sppdm {

// Experiment description: `key = value` lines grouped into [section]
// blocks.  Unknown sections or keys are rejected; anything omitted gets the
// documented default.

struct ProblemConfig {
  int agents = 5;
  int samples = 20;
  int dim = 32;
  int sparsity = 4;
  double rho = 3.0;
  double noise_sd = 2.0;
  double l1_weight = 0.01;
  double box_lo = -1.0;
  double box_hi = 1.0;
  double lipschitz = 1.0;
  double weak_convexity = -1.0;

  RegressionSpec regression_spec() const {
    RegressionSpec s;
    s.agents = agents;
    s.samples_per_agent = samples;
    s.dim = dim;
    s.sparsity = sparsity;
    s.rho = rho;
    s.noise_sd = noise_sd;
    s.l1_weight = l1_weight;
    s.box_lo = box_lo;
    s.box_hi = box_hi;
    s.lipschitz = lipschitz;
    s.weak_convexity = weak_convexity;
    return s;
  }
};

struct AlgorithmConfig {
  std::string label;                 // section suffix, names output files
  std::string algorithm = "sppdm";   // sppdm | pg_extra | prox_dgd | psgd
  SolverConfig solver;               // alpha..batch (iterations/seed stitched in per run)
};

struct RunConfig {
  int iterations = 2000;
  int trials = 1;
  std::uint64_t seed = 1;
  int metric_stride = 1;
  bool potential = false;      // evaluate the potential along the run
  double inner_tolerance = 1e-10;
  double sigma5 = 1.0;
  bool timing = false;         // real wall-clock in traces (breaks byte determinism)
  bool dump_state = false;
  bool distributed = false;    // execute sppdm runs through the message-passing simulator
  std::string output = "out";
};

struct ExperimentConfig {
  ProblemConfig problem;
  TopologySpec graph{.family = "circle", .nodes = 0};  // nodes 0 => problem.agents
  std::vector<AlgorithmConfig> algorithms;
  RunConfig run;

  int graph_nodes() const {
    return graph.nodes > 0 ? graph.nodes : problem.agents;
  }
  Graph build() const {
    TopologySpec s = graph;
    s.nodes = graph_nodes();
    return build_graph(s);
  }
};

namespace confdetail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  bool consumed = false;
};

struct Section {
  std::string name;
  int line = 0;
  std::map<std::string, Entry> entries;
};

inline std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> sections;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("line " + std::to_string(line_no) +
                         ": unterminated section header");
      Section s;
      s.name = trim(line.substr(1, line.size() - 2));
      s.line = line_no;
      sections.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'key = value'");
    if (sections.empty())
      throw ParseError("line " + std::to_string(line_no) +
                       ": key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty key");
    auto& entries = sections.back().entries;
    if (entries.count(key))
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" +
                       key + "'");
    entries[key] = Entry{value, line_no, false};
  }
  return sections;
}

class SectionReader {
 public:
  explicit SectionReader(Section& s) : section_(s) {}

  bool has(const std::string& key) const {
    return section_.entries.count(key) > 0;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = section_.entries.find(key);
    if (it == section_.entries.end()) return fallback;
    it->second.consumed = true;
    return it->second.value;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = section_.entries.find(key);
    if (it == section_.entries.end()) return fallback;
    it->second.consumed = true;
    try {
      return parse_double(it->second.value);
    } catch (const ParseError&) {
      throw ValidationError(field(key) + ": not a number (line " +
                            std::to_string(it->second.line) + ")");
    }
  }

  int get_int(const std::string& key, int fallback) {
    auto it = section_.entries.find(key);
    if (it == section_.entries.end()) return fallback;
    it->second.consumed = true;
    try {
      std::size_t pos = 0;
      const int v = std::stoi(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ValidationError(field(key) + ": not an integer (line " +
                            std::to_string(it->second.line) + ")");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = section_.entries.find(key);
    if (it == section_.entries.end()) return fallback;
    it->second.consumed = true;
    try {
      return std::stoull(it->second.value);
    } catch (...) {
      throw ValidationError(field(key) + ": not an integer (line " +
                            std::to_string(it->second.line) + ")");
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = section_.entries.find(key);
    if (it == section_.entries.end()) return fallback;
    it->second.consumed = true;
    const std::string& v = it->second.value;
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ValidationError(field(key) + ": expected on/off (line " +
                          std::to_string(it->second.line) + ")");
  }

  void reject_unknown() const {
    for (const auto& [key, entry] : section_.entries)
      if (!entry.consumed)
        throw ValidationError(field(key) + ": unknown key (line " +
                              std::to_string(entry.line) + ")");
  }

 private:
  std::string field(const std::string& key) const {
    return section_.name + "." + key;
  }
  Section& section_;
};

inline std::vector<std::pair<int, int>> parse_edge_list(const std::string& s) {
  std::vector<std::pair<int, int>> edges;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    const auto dash = tok.find('-');
    if (dash == std::string::npos)
      throw ValidationError("graph.edges: expected 'i-j' pairs");
    edges.emplace_back(std::stoi(tok.substr(0, dash)),
                       std::stoi(tok.substr(dash + 1)));
  }
  return edges;
}

inline void require_positive(double v, const std::string& field) {
  if (!(v > 0.0)) throw ValidationError(field + ": must be positive");
}

}  // namespace confdetail

inline ExperimentConfig parse_config_text(const std::string& text) {
  using confdetail::SectionReader;
  auto sections = confdetail::tokenize(text);

  ExperimentConfig cfg;
  bool saw_problem = false, saw_graph = false, saw_run = false;

  for (auto& section : sections) {
    SectionReader r(section);
    if (section.name == "problem") {
      if (saw_problem)
        throw ParseError("line " + std::to_string(section.line) +
                         ": repeated [problem]");
      saw_problem = true;
      auto& p = cfg.problem;
      p.agents = r.get_int("agents", p.agents);
      p.samples = r.get_int("samples", p.samples);
      p.dim = r.get_int("dim", p.dim);
      p.sparsity = r.get_int("sparsity", p.sparsity);
      p.rho = r.get_double("rho", p.rho);
      p.noise_sd = r.get_double("noise_sd", p.noise_sd);
      p.l1_weight = r.get_double("l1_weight", p.l1_weight);
      p.box_lo = r.get_double("box_lo", p.box_lo);
      p.box_hi = r.get_double("box_hi", p.box_hi);
      p.lipschitz = r.get_double("lipschitz", p.lipschitz);
      p.weak_convexity = r.get_double("weak_convexity", p.weak_convexity);
      r.reject_unknown();
    } else if (section.name == "graph") {
      if (saw_graph)
        throw ParseError("line " + std::to_string(section.line) +
                         ": repeated [graph]");
      saw_graph = true;
      cfg.graph.family = r.get_string("topology", cfg.graph.family);
      cfg.graph.nodes = r.get_int("nodes", cfg.graph.nodes);
      const std::string edges = r.get_string("edges", "");
      if (!edges.empty()) cfg.graph.edges = confdetail::parse_edge_list(edges);
      r.reject_unknown();
    } else if (section.name == "run") {
      if (saw_run)
        throw ParseError("line " + std::to_string(section.line) +
                         ": repeated [run]");
      saw_run = true;
      auto& run = cfg.run;
      run.iterations = r.get_int("iterations", run.iterations);
      run.trials = r.get_int("trials", run.trials);
      run.seed = r.get_u64("seed", run.seed);
      run.metric_stride = r.get_int("metric_stride", run.metric_stride);
      run.potential = r.get_bool("potential", run.potential);
      run.inner_tolerance = r.get_double("inner_tolerance", run.inner_tolerance);
      run.sigma5 = r.get_double("sigma5", run.sigma5);
      run.timing = r.get_bool("timing", run.timing);
      run.dump_state = r.get_bool("dump_state", run.dump_state);
      run.distributed = r.get_bool("distributed", run.distributed);
      run.output = r.get_string("output", run.output);
      r.reject_unknown();
    } else if (section.name.rfind("solver.", 0) == 0) {
      AlgorithmConfig alg;
      alg.label = section.name.substr(7);
      if (alg.label.empty())
        throw ValidationError("solver section needs a label: [solver.<name>]");
      for (const auto& existing : cfg.algorithms)
        if (existing.label == alg.label)
          throw ParseError("line " + std::to_string(section.line) +
                           ": repeated [" + section.name + "]");
      alg.algorithm = r.get_string("algorithm", "sppdm");
      auto& s = alg.solver;
      s.alpha = r.get_double("alpha", s.alpha);
      s.beta = r.get_double("beta", s.beta);
      s.gamma = r.get_double("gamma", s.gamma);
      s.c = r.get_double("c", s.c);
      s.kappa = r.get_double("kappa", s.kappa);
      const std::string momentum = r.get_string("momentum", "nesterov");
      if (momentum == "zero")
        s.momentum = MomentumKind::zero;
      else if (momentum == "constant")
        s.momentum = MomentumKind::constant;
      else if (momentum == "nesterov")
        s.momentum = MomentumKind::nesterov;
      else
        throw ValidationError(section.name +
                              ".momentum: expected zero/constant/nesterov");
      s.eta = r.get_double("eta", s.eta);
      const std::string batch = r.get_string("batch", "full");
      if (batch == "full") {
        s.batch = kFullBatch;
      } else {
        try {
          s.batch = std::stoi(batch);
        } catch (...) {
          throw ValidationError(section.name +
                                ".batch: expected an integer or 'full'");
        }
      }
      r.reject_unknown();
      cfg.algorithms.push_back(std::move(alg));
    } else {
      throw ValidationError(section.name + ": unknown section (line " +
                            std::to_string(section.line) + ")");
    }
  }

  if (cfg.algorithms.empty()) {
    AlgorithmConfig alg;
    alg.label = "sppdm";
    cfg.algorithms.push_back(alg);  // defaults
  }

  // field validation
  const auto& p = cfg.problem;
  if (p.agents < 1) throw ValidationError("problem.agents: must be >= 1");
  if (p.samples < 1) throw ValidationError("problem.samples: must be >= 1");
  if (p.dim < 1) throw ValidationError("problem.dim: must be >= 1");
  if (p.sparsity < 0 || p.sparsity > p.dim)
    throw ValidationError("problem.sparsity: must lie in [0, dim]");
  confdetail::require_positive(p.rho, "problem.rho");
  if (p.noise_sd < 0) throw ValidationError("problem.noise_sd: must be >= 0");
  if (p.l1_weight < 0) throw ValidationError("problem.l1_weight: must be >= 0");
  if (p.box_lo > 0 || p.box_hi < 0)
    throw ValidationError("problem.box_lo/box_hi: box must contain 0");
  if (cfg.run.iterations < 1)
    throw ValidationError("run.iterations: must be >= 1");
  if (cfg.run.trials < 1) throw ValidationError("run.trials: must be >= 1");
  if (cfg.run.metric_stride < 1)
    throw ValidationError("run.metric_stride: must be >= 1");
  confdetail::require_positive(cfg.run.inner_tolerance, "run.inner_tolerance");
  for (const auto& alg : cfg.algorithms) {
    const std::string prefix = "solver." + alg.label + ".";
    const auto& s = alg.solver;
    if (alg.algorithm != "sppdm" && alg.algorithm != "pg_extra" &&
        alg.algorithm != "prox_dgd" && alg.algorithm != "psgd")
      throw ValidationError(prefix + "algorithm: unknown algorithm '" +
                            alg.algorithm + "'");
    confdetail::require_positive(s.alpha, prefix + "alpha");
    confdetail::require_positive(s.gamma, prefix + "gamma");
    confdetail::require_positive(s.c, prefix + "c");
    confdetail::require_positive(s.kappa, prefix + "kappa");
    if (s.beta <= 0.0 || s.beta > 1.0)
      throw ValidationError(prefix + "beta: must be in (0, 1]");
    if (s.eta < 0.0) throw ValidationError(prefix + "eta: must be >= 0");
    if (s.batch < 0) throw ValidationError(prefix + "batch: must be >= 0");
  }
  cfg.build();  // topology errors surface at parse time
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path));
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  const auto kv = [&out](const std::string& k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  out += "[problem]\n";
  kv("agents", std::to_string(cfg.problem.agents));
  kv("samples", std::to_string(cfg.problem.samples));
  kv("dim", std::to_string(cfg.problem.dim));
  kv("sparsity", std::to_string(cfg.problem.sparsity));
  kv("rho", format_double(cfg.problem.rho));
  kv("noise_sd", format_double(cfg.problem.noise_sd));
  kv("l1_weight", format_double(cfg.problem.l1_weight));
  kv("box_lo", format_double(cfg.problem.box_lo));
  kv("box_hi", format_double(cfg.problem.box_hi));
  kv("lipschitz", format_double(cfg.problem.lipschitz));
  kv("weak_convexity", format_double(cfg.problem.weak_convexity));
  out += "\n[graph]\n";
  kv("topology", cfg.graph.family);
  if (cfg.graph.nodes > 0) kv("nodes", std::to_string(cfg.graph.nodes));
  if (!cfg.graph.edges.empty()) {
    std::string edges;
    for (std::size_t i = 0; i < cfg.graph.edges.size(); ++i) {
      if (i) edges += ',';
      edges += std::to_string(cfg.graph.edges[i].first) + "-" +
               std::to_string(cfg.graph.edges[i].second);
    }
    kv("edges", edges);
  }
  out += "\n[run]\n";
  kv("iterations", std::to_string(cfg.run.iterations));
  kv("trials", std::to_string(cfg.run.trials));
  kv("seed", std::to_string(cfg.run.seed));
  kv("metric_stride", std::to_string(cfg.run.metric_stride));
  kv("potential", cfg.run.potential ? "on" : "off");
  kv("inner_tolerance", format_double(cfg.run.inner_tolerance));
  kv("sigma5", format_double(cfg.run.sigma5));
  kv("timing", cfg.run.timing ? "on" : "off");
  kv("dump_state", cfg.run.dump_state ? "on" : "off");
  kv("distributed", cfg.run.distributed ? "on" : "off");
  kv("output", cfg.run.output);
  for (const auto& alg : cfg.algorithms) {
    out += "\n[solver." + alg.label + "]\n";
    kv("algorithm", alg.algorithm);
    kv("alpha", format_double(alg.solver.alpha));
    kv("beta", format_double(alg.solver.beta));
    kv("gamma", format_double(alg.solver.gamma));
    kv("c", format_double(alg.solver.c));
    kv("kappa", format_double(alg.solver.kappa));
    switch (alg.solver.momentum) {
      case MomentumKind::zero: kv("momentum", "zero"); break;
      case MomentumKind::constant: kv("momentum", "constant"); break;
      case MomentumKind::nesterov: kv("momentum", "nesterov"); break;
    }
    kv("eta", format_double(alg.solver.eta));
    kv("batch", alg.solver.batch == kFullBatch
                    ? "full"
                    : std::to_string(alg.solver.batch));
  }
  return out;
}

// Human-readable derived facts plus soft warnings (the descent conditions
// are checked but violating them only warns; the default experiment itself
// uses the accelerated schedule that leaves the admissible band).
struct ConfigReport {
  std::vector<std::string> info;
  std::vector<std::string> warnings;
};

inline ConfigReport describe_config(const ExperimentConfig& cfg) {
  ConfigReport report;
  const Graph g = cfg.build();
  std::vector<int> degrees = g.degree;
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());

  for (const auto& alg : cfg.algorithms) {
    if (alg.algorithm != "sppdm") continue;
    for (int d : degrees) {
      report.info.push_back(
          "solver." + alg.label + ": psi = " +
          format_double(psi_weight(alg.solver, d)) + " at degree " +
          std::to_string(d));
    }
    ProblemInstance nominal;  // constants only; terms are irrelevant here
    nominal.lipschitz = cfg.problem.lipschitz;
    nominal.weak_convexity = cfg.problem.weak_convexity;
    nominal.dim = cfg.problem.dim;
    const TheoryConstants t =
        theory_constants(alg.solver, nominal, g, cfg.run.sigma5);
    if (!t.feasible) {
      report.warnings.push_back("solver." + alg.label +
                                ": outside the guaranteed-descent regime (" +
                                (t.violated.empty() ? "schedule" : t.violated) +
                                ")");
    }
    if (alg.solver.momentum == MomentumKind::nesterov && t.eta_cap > 0.0) {
      int crossing = -1;
      for (int k = 0; k < cfg.run.iterations; ++k) {
        if (nesterov_schedule(k) > t.eta_cap) {
          crossing = k;
          break;
        }
      }
      if (crossing >= 0)
        report.info.push_back("solver." + alg.label +
                              ": accelerated schedule exceeds eta_cap = " +
                              format_double(t.eta_cap) + " from iteration " +
                              std::to_string(crossing));
      else
        report.info.push_back("solver." + alg.label +
                              ": accelerated schedule stays below eta_cap = " +
                              format_double(t.eta_cap) +
                              " for the whole run");
    }
  }
  return report;
}

}  // namespace sppdm

#endif  // SPPDM_CONFIG_HPP
