// Command-line front end: run experiments, sweep parameters, emit plot
// scripts, and run the built-in verification suite.
//
// Exit codes: 0 success, 1 failed verification or runtime error, 2 config
// error.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sppdm/config.hpp"
#include "sppdm/harness.hpp"
#include "sppdm/io.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const auto cfg = sppdm::parse_config(config_path);
  const auto report = sppdm::describe_config(cfg);
  for (const auto& line : report.info) std::cout << "info: " << line << "\n";
  for (const auto& line : report.warnings)
    std::cout << "warning: " << line << "\n";

  const auto out = sppdm::run_experiment(cfg);
  std::cout << "output: " << out.directory.string() << "\n";
  for (const auto& r : out.results) {
    std::cout << r.label << " trial " << r.trial << ": checksum " << r.checksum
              << ", " << r.trace.records.size() << " records";
    if (!r.trace.records.empty()) {
      const auto& last = r.trace.records.back();
      std::cout << ", final stationarity "
                << sppdm::format_double(last.stationarity);
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::string& values_csv) {
  const auto cfg = sppdm::parse_config(config_path);
  std::vector<std::string> values;
  std::stringstream ss(values_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) values.push_back(tok);
  }
  const auto rows = sppdm::run_sweep(cfg, param, values);
  for (const auto& row : rows)
    std::cout << row.label << " " << param << "=" << row.value
              << ": plateau stationarity "
              << sppdm::format_double(row.plateau) << "\n";
  return 0;
}

int cmd_verify(bool full) {
  const auto report = sppdm::verify_suite(full, [](const sppdm::CheckResult& c) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name;
    if (!c.detail.empty()) std::cout << " - " << c.detail;
    std::cout << "\n";
  });
  std::cout << (report.all_pass() ? "verification passed"
                                  : "verification FAILED")
            << " (" << report.checks.size() << " checks)\n";
  return report.all_pass() ? 0 : 1;
}

int cmd_plot(const std::string& dir) {
  const auto script = sppdm::emit_plots(dir);
  std::cout << "wrote " << script.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed proximal primal-dual consensus optimization"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "run the experiment in a config file");
  run->add_option("config", run_config, "path to the config file")->required();

  std::string sweep_config, sweep_param, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "re-run an experiment over a parameter range");
  sweep->add_option("config", sweep_config, "path to the config file")->required();
  sweep->add_option("--param", sweep_param, "solver parameter to vary")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();

  bool verify_full = false;
  auto* verify = app.add_subcommand("verify", "run the built-in check suite");
  verify->add_flag("--full", verify_full, "include the slow statistical checks");

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "emit plotting scripts for a results directory");
  plot->add_option("dir", plot_dir, "experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config);
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_param, sweep_values);
    if (verify->parsed()) return cmd_verify(verify_full);
    if (plot->parsed()) return cmd_plot(plot_dir);
  } catch (const sppdm::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sppdm::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
