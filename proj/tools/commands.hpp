#pragma once

#include "dlcz/analysis.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace dlcz::cli {

struct Common {
  std::string command_line;
  int threads = 0;
  CoincidenceWindow window;
};

struct SimulateArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
};

struct AnalyzeArgs {
  std::string log;
  std::string out;
  bool table = false;
};

struct SweepArgs {
  std::string config;
  std::string axis;
  std::uint64_t seed = 1;
  std::string out;
};

struct FitArgs {
  std::string table;
  std::string model;
  std::string out;
};

struct ReportArgs {
  std::string dir;
  std::string out;
};

int cmd_simulate(const Common& common, const SimulateArgs& args);
int cmd_analyze(const Common& common, const AnalyzeArgs& args);
int cmd_sweep(const Common& common, const SweepArgs& args);
int cmd_fit(const Common& common, const FitArgs& args);
int cmd_report(const Common& common, const ReportArgs& args);

/// Output directory when --out is not given: $DLCZ_OUT_DIR, else ".".
std::string default_out_dir();

}  // namespace dlcz::cli
