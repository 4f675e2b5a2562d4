#ifndef SPPDM_HARNESS_HPP
#define SPPDM_HARNESS_HPP

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sppdm/baselines.hpp"
#include "sppdm/config.hpp"
#include "sppdm/errors.hpp"
#include "sppdm/io.hpp"
#include "sppdm/metrics.hpp"
#include "sppdm/netsim.hpp"
#include "sppdm/solver.hpp"

namespace sppdm {

// --------------------------------------------------------------------------
// Single algorithm run -> trace

namespace hardetail {

using Clock = std::chrono::steady_clock;

struct Recorder {
  const ProblemInstance& problem;
  const IncidencePair& inc;
  int stride = 1;
  bool timing = false;
  Clock::time_point start = Clock::now();
  RunTrace trace;

  bool due(int k) const { return k % stride == 0; }

  void add(int k, const Mat& x, const Mat& dual, double potential) {
    TraceRecord r;
    r.iteration = k;
    const auto [stat, cons] = stationarity_and_consensus(x, problem);
    r.stationarity = stat;
    r.consensus = cons;
    r.q_gap = optimality_gap(x, dual, problem, inc);
    r.constraint_sq = consensus_violation_sq(inc, x);
    r.potential = potential;
    r.wall_ms =
        timing ? std::chrono::duration<double, std::milli>(Clock::now() - start)
                     .count()
               : 0.0;
    trace.records.push_back(r);
  }
};

}  // namespace hardetail

struct AlgorithmRun {
  RunTrace trace;
  Mat final_x;
  std::optional<RoundLog> rounds;  // set when executed through the simulator
};

// Runs one algorithm on one problem instance and collects the metric trace.
// Records carry iterates x^0 .. x^{K-1}; the optimality gap pairs x^k with
// the dual image p^{k+1} where the algorithm maintains one (zero for the
// mixing-matrix baselines).  When `potential` is supplied it is evaluated at
// the post-round state, i.e. the value stored at record k is phi^{k+1}.
inline AlgorithmRun run_algorithm(const ProblemInstance& problem,
                                  const Graph& g, const IncidencePair& inc,
                                  const AlgorithmConfig& alg,
                                  const RunConfig& run, const Mat& x0,
                                  PotentialEvaluator* potential = nullptr) {
  hardetail::Recorder rec{problem, inc, run.metric_stride, run.timing};
  AlgorithmRun out;

  const int iterations = run.iterations;
  SolverConfig scfg = alg.solver;
  scfg.iterations = iterations;
  scfg.seed = run.seed;

  if (alg.algorithm == "sppdm") {
    const StepVisitor visit = [&](int k, const SolverState& st) {
      if (!rec.due(k)) return;
      double phi = std::numeric_limits<double>::quiet_NaN();
      if (potential != nullptr)
        phi = potential->phi(st.x, st.x_prev, st.z, st.dual_image);
      rec.add(k, st.x_prev, st.dual_image, phi);
    };
    if (run.distributed) {
      NetsimResult res = run_distributed(problem, g, scfg, x0, visit);
      out.final_x = res.state.x;
      out.rounds = std::move(res.log);
    } else {
      out.final_x = run_solver(problem, g, scfg, x0, visit).x;
    }
  } else if (alg.algorithm == "pg_extra") {
    const PgExtraMatrices mats = pg_extra_matrices(g, scfg);
    const Mat zero = Mat::Zero(x0.rows(), x0.cols());
    if (rec.due(0))
      rec.add(0, x0, zero, std::numeric_limits<double>::quiet_NaN());
    PgExtraState st = pg_extra_init(problem, mats, x0);
    for (int k = 1; k < iterations; ++k) {
      if (rec.due(k)) rec.add(k, st.x, zero, std::numeric_limits<double>::quiet_NaN());
      pg_extra_step(st, problem, mats);
    }
    out.final_x = st.x;
  } else if (alg.algorithm == "prox_dgd" || alg.algorithm == "psgd") {
    const Mat mixing = metropolis_weights(g);
    const Mat zero = Mat::Zero(x0.rows(), x0.cols());
    Mat x = x0;
    for (int k = 0; k < iterations; ++k) {
      if (rec.due(k))
        rec.add(k, x, zero, std::numeric_limits<double>::quiet_NaN());
      if (k + 1 == iterations) break;
      const double step = diminishing_step(k);
      if (alg.algorithm == "prox_dgd")
        x = prox_dgd_step(x, problem, mixing, step);
      else
        x = psgd_step(x, problem, mixing, step, scfg.seed, k, scfg.batch);
    }
    out.final_x = x;
  } else {
    throw ValidationError("unknown algorithm '" + alg.algorithm + "'");
  }

  out.trace = std::move(rec.trace);
  out.trace.seed = run.seed;
  return out;
}

// --------------------------------------------------------------------------
// Experiment orchestration

struct TrialResult {
  std::string label;
  int trial = 0;
  RunTrace trace;
  std::string checksum;
  double elapsed_ms = 0.0;
};

struct ExperimentOutput {
  std::filesystem::path directory;
  std::vector<TrialResult> results;
};

inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path out = cfg.run.output;
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("SPPDM_OUTPUT_ROOT"))
    return std::filesystem::path(root) / out;
  return out;
}

namespace hardetail {

inline std::string mean_curves_csv(const std::vector<RunTrace>& traces) {
  std::string out = "iter,stationarity,consensus,q_gap,phi,ax_norm2,wall_ms\n";
  if (traces.empty()) return out;
  const std::size_t rows = traces.front().records.size();
  const double n = static_cast<double>(traces.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double stat = 0, cons = 0, q = 0, phi = 0, ax = 0, ms = 0;
    for (const auto& t : traces) {
      const auto& rec = t.records.at(r);
      stat += rec.stationarity;
      cons += rec.consensus;
      q += rec.q_gap;
      phi += rec.potential;
      ax += rec.constraint_sq;
      ms += rec.wall_ms;
    }
    const int iter = traces.front().records[r].iteration;
    out += std::to_string(iter) + ',' + format_double(stat / n) + ',' +
           format_double(cons / n) + ',' + format_double(q / n) + ',' +
           format_double(phi / n) + ',' + format_double(ax / n) + ',' +
           format_double(ms / n) + '\n';
  }
  return out;
}

}  // namespace hardetail

// Runs every configured algorithm over `trials` independently seeded
// datasets and initial points, writes per-trial traces and per-algorithm
// mean curves, and returns the in-memory results.  With a fixed config and
// seed the output files are byte-identical across invocations (keep
// run.timing off for that).
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  const Graph g = cfg.build();
  const IncidencePair inc = incidence_matrices(g);
  const auto out_dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(out_dir);
  for (const auto& alg : cfg.algorithms)
    std::filesystem::create_directories(out_dir / alg.label);

  struct TrialData {
    std::vector<TrialResult> results;  // one per algorithm
    std::vector<std::optional<RoundLog>> rounds;
    Mat final_x;
    std::vector<Mat> finals;
  };

  const auto run_trial = [&](int t) {
    TrialData data;
    const std::uint64_t trial_seed = cfg.run.seed + static_cast<std::uint64_t>(t);
    auto gen = generate_regression(trial_seed, cfg.problem.regression_spec());
    const Mat x0 =
        random_initial_point(trial_seed, cfg.problem.agents, cfg.problem.dim);
    gen.problem.sample_variance = estimate_sample_variance(gen.problem, x0);

    RunConfig run = cfg.run;
    run.seed = trial_seed;

    for (const auto& alg : cfg.algorithms) {
      std::optional<PotentialEvaluator> potential;
      if (run.potential && alg.algorithm == "sppdm") {
        const TheoryConstants tc =
            theory_constants(alg.solver, gen.problem, g, run.sigma5);
        if (tc.curvature_ok) {
          PotentialSettings ps;
          ps.inner_tolerance = run.inner_tolerance;
          potential.emplace(gen.problem, g, alg.solver, tc.tau, ps);
        }
      }
      const auto started = hardetail::Clock::now();
      AlgorithmRun res =
          run_algorithm(gen.problem, g, inc, alg, run, x0,
                        potential.has_value() ? &*potential : nullptr);
      TrialResult tr;
      tr.label = alg.label;
      tr.trial = t;
      tr.trace = std::move(res.trace);
      tr.checksum = state_checksum(res.final_x);
      tr.elapsed_ms = std::chrono::duration<double, std::milli>(
                          hardetail::Clock::now() - started)
                          .count();
      data.results.push_back(std::move(tr));
      data.rounds.push_back(std::move(res.rounds));
      data.finals.push_back(std::move(res.final_x));
    }
    return data;
  };

  // trials are independent; run them concurrently when the host allows
  std::vector<TrialData> trial_data(static_cast<std::size_t>(cfg.run.trials));
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw > 1 && cfg.run.trials > 1) {
    std::vector<std::future<TrialData>> futures;
    futures.reserve(static_cast<std::size_t>(cfg.run.trials));
    for (int t = 0; t < cfg.run.trials; ++t)
      futures.push_back(std::async(std::launch::async, run_trial, t));
    for (int t = 0; t < cfg.run.trials; ++t)
      trial_data[static_cast<std::size_t>(t)] = futures[static_cast<std::size_t>(t)].get();
  } else {
    for (int t = 0; t < cfg.run.trials; ++t)
      trial_data[static_cast<std::size_t>(t)] = run_trial(t);
  }

  // single-threaded merge and file writes
  ExperimentOutput out;
  out.directory = out_dir;
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    const auto& alg = cfg.algorithms[a];
    std::vector<RunTrace> traces;
    for (int t = 0; t < cfg.run.trials; ++t) {
      auto& tr = trial_data[static_cast<std::size_t>(t)].results[a];
      write_text_file(out_dir / alg.label /
                          ("trial_" + std::to_string(t) + ".csv"),
                      trace_to_csv(tr.trace));
      if (cfg.run.dump_state)
        write_text_file(out_dir / alg.label /
                            ("state_" + std::to_string(t) + ".csv"),
                        state_to_csv(trial_data[static_cast<std::size_t>(t)]
                                         .finals[a]));
      if (trial_data[static_cast<std::size_t>(t)].rounds[a].has_value())
        write_text_file(
            out_dir / alg.label / ("rounds_" + std::to_string(t) + ".csv"),
            round_log_to_csv(*trial_data[static_cast<std::size_t>(t)].rounds[a]));
      traces.push_back(tr.trace);
      out.results.push_back(std::move(tr));
    }
    write_text_file(out_dir / alg.label / "mean.csv",
                    hardetail::mean_curves_csv(traces));
    if (alg.algorithm == "sppdm") {
      ProblemInstance nominal;
      nominal.lipschitz = cfg.problem.lipschitz;
      nominal.weak_convexity = cfg.problem.weak_convexity;
      nominal.dim = cfg.problem.dim;
      write_text_file(out_dir / alg.label / "theory.txt",
                      theory_report(theory_constants(alg.solver, nominal, g,
                                                     cfg.run.sigma5)));
    }
  }
  write_text_file(out_dir / "config.ini", serialize_config(cfg));
  return out;
}

// --------------------------------------------------------------------------
// Parameter sweep: re-run the experiment once per value, write a plateau
// summary (mean stationarity over the last tenth of the iterations).

struct SweepRow {
  std::string label;
  std::string value;
  double plateau = 0.0;
};

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const std::string& param,
                                       const std::vector<std::string>& values) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  const auto root = resolve_output_dir(base);

  for (const auto& value : values) {
    ExperimentConfig cfg = base;
    cfg.run.output =
        (std::filesystem::path(base.run.output) / ("sweep_" + param + "_" + value))
            .string();
    for (auto& alg : cfg.algorithms) {
      auto& s = alg.solver;
      if (param == "batch") {
        if (value == "full") {
          s.batch = kFullBatch;
        } else {
          try {
            s.batch = std::stoi(value);
          } catch (...) {
            throw ValidationError("sweep.batch: expected integer or 'full'");
          }
        }
      } else if (param == "alpha")
        s.alpha = parse_double(value);
      else if (param == "beta")
        s.beta = parse_double(value);
      else if (param == "gamma")
        s.gamma = parse_double(value);
      else if (param == "c")
        s.c = parse_double(value);
      else if (param == "kappa")
        s.kappa = parse_double(value);
      else if (param == "eta") {
        s.eta = parse_double(value);
        s.momentum = MomentumKind::constant;
      } else
        throw ValidationError("sweep.param: unknown parameter '" + param + "'");
    }
    const auto out = run_experiment(cfg);

    for (const auto& alg : cfg.algorithms) {
      std::vector<double> tails;
      for (const auto& tr : out.results) {
        if (tr.label != alg.label) continue;
        tails.push_back(plateau_level(tr.trace.column_stationarity()));
      }
      double mean = 0.0;
      for (double v : tails) mean += v;
      rows.push_back(SweepRow{alg.label, value,
                              tails.empty() ? 0.0 : mean / tails.size()});
    }
  }

  std::string csv = "label,value,plateau_stationarity\n";
  for (const auto& r : rows)
    csv += r.label + ',' + r.value + ',' + format_double(r.plateau) + '\n';
  write_text_file(root / ("sweep_" + param + "_summary.csv"), csv);
  return rows;
}

// --------------------------------------------------------------------------
// Plot-script emission (no plotting engine is bundled; the script consumes
// the mean-curve CSVs with matplotlib).

inline std::filesystem::path emit_plots(const std::filesystem::path& dir) {
  bool any = false;
  if (std::filesystem::exists(dir))
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().filename() == "mean.csv")
        any = true;
  if (!any)
    throw MissingData("no mean.csv files under " + dir.string());

  const std::string script = R"PY(#!/usr/bin/env python3
"""Log-scale stationarity/consensus curves from the mean-curve CSVs."""
import csv
import pathlib
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

root = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path(__file__).parent
series = {}
for path in sorted(root.rglob("mean.csv")):
    label = path.parent.relative_to(root).as_posix()
    with open(path) as f:
        rows = list(csv.DictReader(f))
    series[label] = {
        "iter": [int(r["iter"]) for r in rows],
        "stationarity": [float(r["stationarity"]) for r in rows],
        "consensus": [float(r["consensus"]) for r in rows],
    }
if not series:
    sys.exit("no mean.csv found under " + str(root))

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for label, data in series.items():
    axes[0].semilogy(data["iter"], data["stationarity"], label=label)
    axes[1].semilogy(data["iter"], data["consensus"], label=label)
axes[0].set_xlabel("iteration"); axes[0].set_ylabel("stationarity error")
axes[1].set_xlabel("iteration"); axes[1].set_ylabel("consensus error")
axes[0].legend(); axes[1].legend()
fig.tight_layout()
out = root / "curves.png"
fig.savefig(out, dpi=150)
print(f"wrote {out}")
)PY";
  const auto path = dir / "plot_results.py";
  write_text_file(path, script);
  return path;
}

// --------------------------------------------------------------------------
// Built-in verification suite: the cross-checks the library's guarantees
// rest on, runnable from the CLI.  `full` adds the slow statistical checks.

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace verifydetail {

inline Graph random_connected_graph(int nodes, Prng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < nodes; ++v)
    edges.emplace_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(v))), v);
  const int extra = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes)));
  for (int e = 0; e < extra; ++e) {
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes)));
    const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes)));
    if (a == b) continue;
    const auto edge = std::minmax(a, b);
    bool dup = false;
    for (auto [i, j] : edges)
      if (std::minmax(i, j) == edge) dup = true;
    if (!dup) edges.emplace_back(edge.first, edge.second);
  }
  return make_graph(nodes, std::move(edges));
}

// smallest desk instance the checks run on
inline GeneratedProblem tiny_problem(std::uint64_t seed) {
  RegressionSpec spec;
  spec.agents = 3;
  spec.samples_per_agent = 12;
  spec.dim = 8;
  spec.sparsity = 2;
  return generate_regression(seed, spec);
}

}  // namespace verifydetail

inline VerifyReport verify_suite(bool full,
                                 const std::function<void(const CheckResult&)>&
                                     on_check = {}) {
  VerifyReport report;
  const auto run_check = [&](const std::string& name,
                             const std::function<std::pair<bool, std::string>()>&
                                 body) {
    CheckResult result;
    result.name = name;
    try {
      auto [pass, detail] = body();
      result.pass = pass;
      result.detail = std::move(detail);
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    if (on_check) on_check(result);
    report.checks.push_back(std::move(result));
  };

  run_check("graph.incidence_identities", []() -> std::pair<bool, std::string> {
    Prng rng(2024, 0x6772ULL);
    for (int trial = 0; trial < 10; ++trial) {
      const int nodes = 2 + static_cast<int>(rng.below(9));
      const Graph g = verifydetail::random_connected_graph(nodes, rng);
      const IncidencePair inc = incidence_matrices(g);
      Eigen::MatrixXi a = inc.signed_incidence.cast<int>();
      Eigen::MatrixXi b = inc.signless_incidence.cast<int>();
      Eigen::MatrixXi lhs = a.transpose() * a + b.transpose() * b;
      for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < nodes; ++j) {
          const int want =
              i == j ? 2 * g.degree[static_cast<std::size_t>(i)] : 0;
          if (lhs(i, j) != want)
            return {false, "A'A + B'B != 2D on trial " +
                               std::to_string(trial) + " (seed 2024)"};
        }
      const IncidencePair again = incidence_matrices(g);
      if (again.signed_incidence != inc.signed_incidence)
        return {false, "incidence rebuild not bit-identical"};
    }
    return {true, "10 random graphs, exact integer identity"};
  });

  run_check("graph.metropolis_rows", []() -> std::pair<bool, std::string> {
    Prng rng(2025, 0x6d77ULL);
    for (int trial = 0; trial < 10; ++trial) {
      const Graph g = verifydetail::random_connected_graph(
          2 + static_cast<int>(rng.below(9)), rng);
      const Mat w = metropolis_weights(g);
      if ((w - w.transpose()).cwiseAbs().maxCoeff() != 0.0)
        return {false, "not symmetric"};
      if ((w.rowwise().sum() - Vec::Ones(g.nodes)).cwiseAbs().maxCoeff() >
          1e-15)
        return {false, "rows do not sum to 1"};
    }
    return {true, "symmetric, row sums 1 within 1e-15"};
  });

  run_check("graph.spectral_norm_oracle", []() -> std::pair<bool, std::string> {
    Prng rng(2026, 0x736eULL);
    double worst = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
      const Graph g = verifydetail::random_connected_graph(
          2 + static_cast<int>(rng.below(9)), rng);
      const IncidencePair inc = incidence_matrices(g);
      const double mine = spectral_norm(inc.signed_incidence);
      Eigen::SelfAdjointEigenSolver<Mat> es(inc.laplacian());
      const double want = std::sqrt(es.eigenvalues().maxCoeff());
      worst = std::max(worst, std::abs(mine - want) / std::max(1.0, want));
    }
    return {worst <= 1e-9, "max rel dev vs dense eigensolve = " +
                               format_double(worst)};
  });

  run_check("oracles.prox_grid", []() -> std::pair<bool, std::string> {
    // brute-force scalar grid around v, resolution 1e-6
    const auto grid_best = [](double v, double w, double l1, double lo,
                              double hi) {
      double best_u = lo, best_val = std::numeric_limits<double>::infinity();
      const double a = std::max(lo, v - 2.0), b = std::min(hi, v + 2.0);
      for (double u = a; u <= b; u += 1e-6) {
        const double val = 0.5 * w * (v - u) * (v - u) + l1 * std::abs(u);
        if (val < best_val) {
          best_val = val;
          best_u = u;
        }
      }
      return best_u;
    };
    Prng rng(2027, 0x7078ULL);
    for (int trial = 0; trial < 12; ++trial) {
      const double v = rng.uniform(-1.5, 1.5);
      const double w = rng.uniform(0.5, 12.0);
      const double l1 = rng.uniform(0.0, 0.5);
      const L1BoxRegularizer r(l1, -1.0, 1.0);
      Vec vv(1);
      vv << v;
      const double got = r.prox(vv, w)[0];
      const double want = grid_best(v, w, l1, -1.0, 1.0);
      if (std::abs(got - want) > 2e-6)
        return {false, "prox mismatch at trial " + std::to_string(trial) +
                           " (seed 2027): got " + format_double(got) +
                           " want " + format_double(want)};
    }
    return {true, "12 random scalar prox cases vs 1e-6 grid"};
  });

  run_check("oracles.gradient_fd", []() -> std::pair<bool, std::string> {
    const auto gen = verifydetail::tiny_problem(11);
    Prng rng(2028, 0x6664ULL);
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
      const int agent = static_cast<int>(rng.below(3));
      Vec x(gen.problem.dim);
      for (int i = 0; i < gen.problem.dim; ++i) x[i] = rng.uniform(-1.0, 1.0);
      const auto& term = gen.problem.smooth_term(agent);
      const Vec grad = term.gradient(x);
      const double h = 1e-6 * (1.0 + x.norm());
      Vec fd(gen.problem.dim);
      for (int i = 0; i < gen.problem.dim; ++i) {
        Vec hi = x, lo = x;
        hi[i] += h;
        lo[i] -= h;
        fd[i] = (term.value(hi) - term.value(lo)) / (2.0 * h);
      }
      worst = std::max(worst,
                       (grad - fd).norm() / std::max(1.0, grad.norm()));
    }
    return {worst <= 1e-5,
            "max rel FD error = " + format_double(worst) + " (seed 2028)"};
  });

  run_check("solver.primal_dual_equivalence",
            []() -> std::pair<bool, std::string> {
    double worst = 0.0;
    for (std::uint64_t seed : {31ULL, 32ULL}) {
      const auto gen = verifydetail::tiny_problem(seed);
      const Graph g = circle_graph(3);
      const IncidencePair inc = incidence_matrices(g);
      for (int batch : {kFullBatch, 3}) {
        SolverConfig cfg;
        cfg.batch = batch;
        cfg.seed = seed;
        cfg.iterations = 20;
        const Mat x0 = random_initial_point(seed, 3, gen.problem.dim);
        SolverState st = sppdm_init(gen.problem, g, cfg, x0);
        ReferenceState ref = reference_init(gen.problem, g, inc, cfg, x0);
        worst = std::max(worst, (st.x - ref.x).cwiseAbs().maxCoeff());
        for (int k = 1; k < cfg.iterations; ++k) {
          sppdm_step(st, gen.problem, g, cfg);
          reference_step(ref, gen.problem, g, inc, cfg);
          worst = std::max(worst, (st.x - ref.x).cwiseAbs().maxCoeff());
          worst = std::max(
              worst, (st.dual_image -
                      inc.signed_incidence.transpose() * ref.lambda)
                         .cwiseAbs()
                         .maxCoeff());
        }
      }
    }
    return {worst <= 1e-10,
            "sup deviation = " + format_double(worst) + " (seeds 31-32)"};
  });

  run_check("netsim.bit_equivalence", []() -> std::pair<bool, std::string> {
    const auto gen = verifydetail::tiny_problem(41);
    const Graph g = circle_graph(3);
    SolverConfig cfg;
    cfg.batch = 2;
    cfg.seed = 41;
    cfg.iterations = 60;
    const Mat x0 = random_initial_point(41, 3, gen.problem.dim);
    const SolverState direct = run_solver(gen.problem, g, cfg, x0);
    const NetsimResult sim = run_distributed(gen.problem, g, cfg, x0);
    const bool same = direct.x == sim.state.x && direct.z == sim.state.z &&
                      direct.dual_image == sim.state.dual_image;
    long msgs = 0;
    for (const auto& r : sim.log.rounds) msgs += r.messages;
    const bool count_ok =
        msgs == static_cast<long>(cfg.iterations) * 2 * g.edge_count();
    return {same && count_ok,
            same ? "bit-identical, messages = " + std::to_string(msgs)
                 : "trajectories differ (seed 41)"};
  });

  run_check("metrics.theory_worked_values",
            []() -> std::pair<bool, std::string> {
    SolverConfig cfg_a;
    cfg_a.kappa = 1.0;
    const TheoryConstants a =
        theory_constants(cfg_a, 0.5, -0.5, 1.0, 2, 1.0, 0.0);
    if (std::abs(a.sigma4 - 0.5) > 1e-12)
      return {false, "sigma4 != 0.5"};
    SolverConfig cfg_b;
    cfg_b.kappa = 1.0;
    cfg_b.c = 2.0;
    cfg_b.gamma = 3.0;
    const TheoryConstants b =
        theory_constants(cfg_b, 0.9, -0.9, 1.0, 2, 1.0, 0.0);
    const double want = std::sqrt(5.3 / 13.2);
    if (std::abs(b.eta_cap - want) > 1e-12)
      return {false, "eta_cap != sqrt(5.3/13.2)"};
    return {true, "sigma4 and eta_cap match hand arithmetic to 1e-12"};
  });

  run_check("metrics.potential_descent_short",
            []() -> std::pair<bool, std::string> {
    const auto gen = verifydetail::tiny_problem(51);
    ProblemInstance problem = gen.problem;
    problem.lipschitz = problem.certified_lipschitz();
    problem.weak_convexity = problem.certified_weak_convexity();
    const Graph g = circle_graph(3);

    SolverConfig cfg;
    cfg.kappa = std::max(1.0, -2.0 * problem.weak_convexity);
    cfg.gamma = 3.05 * problem.lipschitz;
    cfg.c = 2.0;
    cfg.momentum = MomentumKind::constant;
    TheoryConstants tc = theory_constants(cfg, problem, g, 1.0);
    cfg.eta = 0.5 * tc.eta_cap;
    tc = theory_constants(cfg, problem, g, 1.0);
    cfg.alpha = 0.9 * tc.alpha_cap;
    tc = theory_constants(cfg, problem, g, 1.0);  // beta cap depends on alpha
    cfg.beta = 0.9 * tc.beta_cap;
    cfg.batch = kFullBatch;
    cfg.iterations = 60;
    cfg.seed = 51;

    PotentialSettings ps;
    PotentialEvaluator phi(problem, g, cfg, tc.tau, ps);
    const Mat x0 = random_initial_point(51, 3, problem.dim);
    double prev = std::numeric_limits<double>::infinity();
    double worst_rise = 0.0;
    bool above_floor = true;
    const StepVisitor visit = [&](int, const SolverState& st) {
      const double value = phi.phi(st.x, st.x_prev, st.z, st.dual_image);
      if (value < problem.objective_floor - 1e-9) above_floor = false;
      if (std::isfinite(prev)) worst_rise = std::max(worst_rise, value - prev);
      prev = value;
    };
    run_solver(problem, g, cfg, x0, visit);
    return {worst_rise <= 1e-8 && above_floor,
            "max per-step rise = " + format_double(worst_rise) + " (seed 51)"};
  });

  if (full) {
    run_check("metrics.variance_lemma", []() -> std::pair<bool, std::string> {
      const auto gen = verifydetail::tiny_problem(61);
      const Graph g = circle_graph(3);
      SolverConfig cfg;
      cfg.seed = 61;
      const Mat x0 = random_initial_point(61, 3, gen.problem.dim);
      cfg.batch = 4;
      const VarianceReport a =
          variance_bound_check(gen.problem, g, cfg, x0, 1000);
      cfg.batch = 8;
      const VarianceReport b =
          variance_bound_check(gen.problem, g, cfg, x0, 1000);
      const double ratio = b.empirical / a.empirical;
      const bool halves = ratio >= 0.35 && ratio <= 0.65;
      return {a.pass && b.pass && halves,
              "bound slack ok, doubling ratio = " + format_double(ratio) +
                  " (seed 61)"};
    });

    run_check("metrics.rate_fit", []() -> std::pair<bool, std::string> {
      const auto gen = verifydetail::tiny_problem(71);
      const Graph g = circle_graph(3);
      SolverConfig cfg;
      cfg.batch = kFullBatch;
      cfg.iterations = 3000;
      cfg.seed = 71;
      const Mat x0 = random_initial_point(71, 3, gen.problem.dim);
      const IncidencePair inc = incidence_matrices(g);
      std::vector<double> q;
      const StepVisitor visit = [&](int, const SolverState& st) {
        q.push_back(optimality_gap(st.x_prev, st.dual_image, gen.problem, inc));
      };
      run_solver(gen.problem, g, cfg, x0, visit);
      const RateReport r = rate_check(q, 100, 3000);
      return {r.pass, "fitted slope = " + format_double(r.slope) + " (seed 71)"};
    });
  }

  return report;
}

}  // namespace sppdm

#endif  // SPPDM_HARNESS_HPP
