#pragma once

#include "dlcz/analysis.hpp"
#include "dlcz/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlcz {

enum class SweepAxis { PExcitation, Tau, Theta2 };

std::string_view to_string(SweepAxis axis);

/// Values in the axis' own unit: dimensionless, us, deg.
struct SweepSpec {
  SweepAxis axis = SweepAxis::PExcitation;
  std::vector<double> values;
};

/// `<axis>=<values> [unit]`, axis one of p_excitation, tau, theta2. Values are
/// a comma list or `lin:a:b:n` / `log:a:b:n`. tau needs a time unit and theta2
/// an angle unit. Throws ConfigError.
SweepSpec parse_sweep_axis(std::string_view text);

/// The configuration of point i.
ExperimentConfig sweep_point_config(const ExperimentConfig& base, const SweepSpec& spec,
                                    std::size_t i);

/// Seed of point i, derived from the sweep seed.
std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t i);

/// One summary row. Observables the analyzer mode does not provide are NaN.
struct SweepRow {
  double axis_value = 0.0;
  double p_excitation = 0.0;
  double tau_us = 0.0;
  double theta1_deg = 0.0;
  double theta2_deg = 0.0;
  std::uint64_t seed = 0;
  std::string run_id;
  std::uint64_t n_trials = 0;
  PairEstimate pairs;
  double e = 0.0, sigma_e = 0.0;
  double s = 0.0, sigma_s = 0.0;
  double visibility = 0.0, sigma_visibility = 0.0;
};

/// Reduces one run to a row: pair statistics from the (0, 0) reference group
/// (or the only group), S in CHSH mode, E in fixed mode, V in fringe mode.
/// Observables the counts cannot define are NaN.
SweepRow summarize_run(const EventLog& log, CoincidenceWindow window = {});

struct SweepOptions {
  SimulationOptions simulation;
  CoincidenceWindow window;
};

/// Runs every point in order; the rows do not depend on thread counts.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SweepSpec& spec,
                                std::uint64_t seed, const SweepOptions& options = {});

/// Tab-separated table with a header line; NaN cells are written as "nan".
void write_sweep_table(std::ostream& out, SweepAxis axis, const std::vector<SweepRow>& rows);

/// Column-name keyed view of a sweep (or any) TSV table.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws DataError when the column is missing.
  std::size_t column(std::string_view name) const;
  bool has(std::string_view name) const;
  std::vector<double> values(std::string_view name) const;
};

/// Throws DataError with a line number on malformed rows.
Table read_table(std::istream& in);

}  // namespace dlcz
