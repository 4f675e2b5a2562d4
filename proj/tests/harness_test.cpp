#include "sppdm/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "sppdm/config.hpp"
#include "sppdm/io.hpp"
#include "support.hpp"

using namespace sppdm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("sppdm_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig cfg = parse_config_text(
      "[problem]\n"
      "agents = 3\n"
      "samples = 8\n"
      "dim = 5\n"
      "sparsity = 2\n"
      "[run]\n"
      "iterations = 25\n"
      "trials = 2\n"
      "seed = 11\n"
      "[solver.sppdm]\n"
      "batch = 2\n"
      "[solver.sppd]\n"
      "momentum = zero\n"
      "batch = 2\n"
      "[solver.psgd]\n"
      "algorithm = psgd\n"
      "batch = 2\n");
  cfg.run.output = out.string();
  return cfg;
}

}  // namespace

TEST(Config, MinimalConfigGetsReferenceDefaults) {
  const ExperimentConfig cfg = parse_config_text(
      "[problem]\n"
      "agents = 4\n"
      "samples = 10\n"
      "dim = 8\n");
  ASSERT_EQ(cfg.algorithms.size(), 1u);
  const SolverConfig& s = cfg.algorithms[0].solver;
  EXPECT_DOUBLE_EQ(s.alpha, 2.0);
  EXPECT_DOUBLE_EQ(s.kappa, 1.0);
  EXPECT_DOUBLE_EQ(s.c, 2.0);
  EXPECT_DOUBLE_EQ(s.gamma, 3.0);
  EXPECT_DOUBLE_EQ(s.beta, 0.9);
  EXPECT_EQ(s.momentum, MomentumKind::nesterov);
  EXPECT_EQ(s.batch, kFullBatch);
  EXPECT_EQ(cfg.graph.family, "circle");
  EXPECT_EQ(cfg.graph_nodes(), 4);
}

TEST(Config, PsiReportedForCircleDefaults) {
  const ExperimentConfig cfg = parse_config_text(
      "[problem]\n"
      "agents = 6\n");
  const ConfigReport report = describe_config(cfg);
  bool found = false;
  for (const auto& line : report.info)
    if (line.find("psi = 12 at degree 2") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(Config, NegativeGammaNamesTheField) {
  try {
    parse_config_text(
        "[solver.sppdm]\n"
        "gamma = -3\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

TEST(Config, UnknownKeyRejectedWithLineNumber) {
  try {
    parse_config_text(
        "[problem]\n"
        "agents = 3\n"
        "wibble = 7\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("wibble"), std::string::npos);
    EXPECT_NE(what.find("line 3"), std::string::npos);
  }
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
  try {
    parse_config_text("[problem]\nagents 3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Config, RoundTripIsIdentity) {
  const ExperimentConfig cfg = parse_config_text(
      "[problem]\n"
      "agents = 7\n"
      "l1_weight = 0.02\n"
      "[graph]\n"
      "topology = edges\n"
      "nodes = 7\n"
      "edges = 0-1,1-2,2-3,3-4,4-5,5-6,0-6\n"
      "[run]\n"
      "iterations = 123\n"
      "trials = 3\n"
      "seed = 42\n"
      "potential = on\n"
      "[solver.main]\n"
      "alpha = 1.5\n"
      "momentum = constant\n"
      "eta = 0.25\n"
      "batch = 16\n");
  const std::string once = serialize_config(cfg);
  const ExperimentConfig reparsed = parse_config_text(once);
  const std::string twice = serialize_config(reparsed);
  EXPECT_EQ(once, twice);
  EXPECT_EQ(reparsed.graph.edges.size(), 7u);
  EXPECT_EQ(reparsed.algorithms[0].solver.batch, 16);
}

TEST(Config, EmptyGraphSectionUsesProblemAgents) {
  const ExperimentConfig cfg = parse_config_text("[problem]\nagents = 9\n");
  const Graph g = cfg.build();
  EXPECT_EQ(g.nodes, 9);
  EXPECT_EQ(g.edge_count(), 9);  // circle
}

TEST(Config, DisconnectedEdgeListFailsAtParseTime) {
  EXPECT_THROW(parse_config_text("[problem]\nagents = 4\n"
                                 "[graph]\ntopology = edges\n"
                                 "edges = 0-1,2-3\n"),
               DisconnectedGraph);
}

// ---------------------------------------------------------------------------

TEST(Experiment, WritesTracesMeansAndReports) {
  const fs::path out = fresh_dir("exp");
  const ExperimentConfig cfg = tiny_experiment(out);
  const ExperimentOutput result = run_experiment(cfg);
  EXPECT_EQ(result.results.size(), 6u);  // 3 algorithms x 2 trials

  for (const std::string label : {"sppdm", "sppd", "psgd"}) {
    EXPECT_TRUE(fs::exists(out / label / "trial_0.csv"));
    EXPECT_TRUE(fs::exists(out / label / "trial_1.csv"));
    EXPECT_TRUE(fs::exists(out / label / "mean.csv"));
  }
  EXPECT_TRUE(fs::exists(out / "sppdm" / "theory.txt"));
  EXPECT_FALSE(fs::exists(out / "psgd" / "theory.txt"));
  EXPECT_TRUE(fs::exists(out / "config.ini"));

  const RunTrace trace =
      trace_from_csv(read_text_file(out / "sppdm" / "trial_0.csv"));
  EXPECT_EQ(trace.records.size(), 25u);
  EXPECT_EQ(trace.records.front().iteration, 0);
  EXPECT_EQ(trace.records.back().iteration, 24);
}

TEST(Experiment, ByteIdenticalReruns) {
  const fs::path out_a = fresh_dir("det_a");
  const fs::path out_b = fresh_dir("det_b");
  ExperimentConfig cfg = tiny_experiment(out_a);
  run_experiment(cfg);
  cfg.run.output = out_b.string();
  run_experiment(cfg);

  for (const std::string label : {"sppdm", "sppd", "psgd"}) {
    for (const std::string file : {"trial_0.csv", "trial_1.csv", "mean.csv"}) {
      EXPECT_EQ(read_text_file(out_a / label / file),
                read_text_file(out_b / label / file))
          << label << "/" << file;
    }
  }
}

TEST(Experiment, DistributedModeMatchesMatrixModeAndLogsRounds) {
  const fs::path out_a = fresh_dir("net_a");
  const fs::path out_b = fresh_dir("net_b");
  ExperimentConfig cfg = parse_config_text(
      "[problem]\nagents = 3\nsamples = 6\ndim = 4\nsparsity = 2\n"
      "[run]\niterations = 15\nseed = 5\n"
      "[solver.sppdm]\nbatch = 2\n");
  cfg.run.output = out_a.string();
  run_experiment(cfg);
  cfg.run.output = out_b.string();
  cfg.run.distributed = true;
  run_experiment(cfg);
  EXPECT_EQ(read_text_file(out_a / "sppdm" / "trial_0.csv"),
            read_text_file(out_b / "sppdm" / "trial_0.csv"));
  EXPECT_TRUE(fs::exists(out_b / "sppdm" / "rounds_0.csv"));
  const std::string rounds = read_text_file(out_b / "sppdm" / "rounds_0.csv");
  EXPECT_NE(rounds.find("round,messages,scalars"), std::string::npos);
}

TEST(Experiment, StateDumpOnDemand) {
  const fs::path out = fresh_dir("dump");
  ExperimentConfig cfg = parse_config_text(
      "[problem]\nagents = 3\nsamples = 6\ndim = 4\nsparsity = 2\n"
      "[run]\niterations = 8\ntrials = 1\ndump_state = on\n"
      "[solver.sppdm]\nbatch = 2\n");
  cfg.run.output = out.string();
  run_experiment(cfg);
  EXPECT_TRUE(fs::exists(out / "sppdm" / "state_0.csv"));
  const std::string dump = read_text_file(out / "sppdm" / "state_0.csv");
  int rows = 0;
  for (char c : dump)
    if (c == '\n') ++rows;
  EXPECT_EQ(rows, 3);  // one row per agent
}

TEST(Sweep, EmitsSummaryAcrossValues) {
  const fs::path out = fresh_dir("sweep");
  ExperimentConfig cfg = parse_config_text(
      "[problem]\nagents = 3\nsamples = 8\ndim = 5\nsparsity = 2\n"
      "[run]\niterations = 40\ntrials = 2\nseed = 3\n"
      "[solver.sppdm]\nbatch = 1\n");
  cfg.run.output = out.string();
  const auto rows = run_sweep(cfg, "batch", {"1", "4"});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(fs::exists(out / "sweep_batch_summary.csv"));
  EXPECT_TRUE(fs::exists(out / "sweep_batch_1" / "sppdm" / "mean.csv"));
  EXPECT_TRUE(fs::exists(out / "sweep_batch_4" / "sppdm" / "mean.csv"));
}

TEST(Plots, ScriptEmittedWhenDataExists) {
  const fs::path out = fresh_dir("plots");
  ExperimentConfig cfg = tiny_experiment(out);
  cfg.run.trials = 1;
  run_experiment(cfg);
  const fs::path script = emit_plots(out);
  EXPECT_TRUE(fs::exists(script));
  const std::string body = read_text_file(script);
  EXPECT_NE(body.find("mean.csv"), std::string::npos);
}

TEST(Plots, EmptyDirectoryIsMissingData) {
  const fs::path out = fresh_dir("noplots");
  EXPECT_THROW(emit_plots(out), MissingData);
}

// ---------------------------------------------------------------------------

TEST(Io, TraceRoundTrip) {
  RunTrace trace;
  for (int k = 0; k < 5; ++k) {
    TraceRecord r;
    r.iteration = k;
    r.stationarity = 0.1 * k;
    r.consensus = 1e-7 / (k + 1);
    r.q_gap = 3.14159e-3 * (k + 1);
    r.constraint_sq = 0.0;
    trace.records.push_back(r);
  }
  const RunTrace back = trace_from_csv(trace_to_csv(trace));
  ASSERT_EQ(back.records.size(), trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    EXPECT_EQ(back.records[i].iteration, trace.records[i].iteration);
    EXPECT_EQ(back.records[i].stationarity, trace.records[i].stationarity);
    EXPECT_EQ(back.records[i].q_gap, trace.records[i].q_gap);
    EXPECT_TRUE(std::isnan(back.records[i].potential));
  }
}

TEST(Io, DatasetExportImportRoundTrip) {
  const fs::path dir = fresh_dir("dataset");
  const auto gen = testsupport::desk_problem(77, 3, 6, 4, 2);
  export_dataset(gen.dataset, dir);
  const RegressionDataset back = import_dataset(dir, 3);
  for (int a = 0; a < 3; ++a) {
    EXPECT_EQ(back.features[static_cast<std::size_t>(a)],
              gen.dataset.features[static_cast<std::size_t>(a)]);
    EXPECT_EQ(back.responses[static_cast<std::size_t>(a)],
              gen.dataset.responses[static_cast<std::size_t>(a)]);
  }
}

TEST(Io, ChecksumDistinguishesStates) {
  Mat a = Mat::Zero(2, 3);
  Mat b = a;
  b(1, 2) = 1e-16;
  EXPECT_NE(state_checksum(a), state_checksum(b));
  EXPECT_EQ(state_checksum(a), state_checksum(Mat::Zero(2, 3)));
}

// ---------------------------------------------------------------------------

TEST(Verify, FastSuitePasses) {
  const VerifyReport report = verify_suite(false);
  for (const auto& c : report.checks)
    EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
  EXPECT_GE(report.checks.size(), 8u);
}
