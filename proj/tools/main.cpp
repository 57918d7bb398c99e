#include "commands.hpp"

#include "dlcz/errors.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>

#include <iostream>

using namespace dlcz;
using namespace dlcz::cli;

int main(int argc, char** argv) {
  CLI::App app{"Simulate and analyze heralded polarization entanglement between atomic memories"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  for (int i = 0; i < argc; ++i) common.command_line += (i ? " " : "") + std::string(argv[i]);
  std::int64_t window_ns = 0;
  app.add_option("--threads", common.threads, "OpenMP threads (0: runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--window", window_ns, "coincidence window width in ns (default: whole trial)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run a configuration and write an event log");
  simulate->add_option("--config", sim.config, "config file")->required();
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--out", sim.out, "log path (default: $DLCZ_OUT_DIR/run_<id>.log)");

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "estimate E, S, g12, pc and V from a log");
  analyze->add_option("log", ana.log, "event log")->required();
  analyze->add_option("--out", ana.out, "result path (default: stdout)");
  analyze->add_flag("--table", ana.table, "per-group g12 table instead of records");

  SweepArgs swp;
  auto* sweep = app.add_subcommand("sweep", "run a configuration over one axis");
  sweep->add_option("--config", swp.config, "config file")->required();
  sweep->add_option("--axis", swp.axis,
                    "p_excitation=<values> | tau=<values> <unit> | theta2=<values> <unit>; "
                    "values: a,b,c or lin:a:b:n or log:a:b:n")
      ->required();
  sweep->add_option("--seed", swp.seed, "master seed");
  sweep->add_option("--out", swp.out, "table path (default: $DLCZ_OUT_DIR/sweep_<axis>.tsv)");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "fit a sweep table");
  fitc->add_option("table", fit.table, "sweep table")->required();
  fitc->add_option("--model", fit.model, "smax or decay")->required();
  fitc->add_option("--out", fit.out, "result path (default: stdout)");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "plot-ready S vs gbar and S, g12 vs tau tables");
  report->add_option("dir", rep.dir, "directory of sweep tables")->required();
  report->add_option("--out", rep.out, "output directory (default: <dir>/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (app.count("--window") > 0) {
    if (window_ns <= 0) {
      fmt::print(stderr, "error: --window must be positive\n");
      return 2;
    }
    common.window = window_ns;
  }

  try {
    if (*simulate) return cmd_simulate(common, sim);
    if (*analyze) return cmd_analyze(common, ana);
    if (*sweep) return cmd_sweep(common, swp);
    if (*fitc) return cmd_fit(common, fit);
    if (*report) return cmd_report(common, rep);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 3;
  } catch (const FitError& e) {
    fmt::print(stderr, "fit error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
