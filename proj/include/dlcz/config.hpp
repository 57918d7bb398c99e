#pragma once

#include "dlcz/core_model.hpp"
#include "dlcz/decoherence.hpp"
#include "dlcz/scheduler.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlcz {

/// How many pairs a trial produces.
enum class PairStatistics {
  Poisson,  // n ~ Poisson(p_excitation)
  Thermal,  // n ~ Bose-Einstein with mean p_excitation
  Single,   // n ~ Bernoulli(p_excitation): at most one pair
  Forced,   // exactly one pair every trial
};

/// Excitation, collection and background parameters.
struct OpticsConfig {
  double p_excitation = 1e-3;
  double eta1 = 0.10;
  double eta2_base = 0.06;
  double bg1 = 0.0;
  double bg2 = 4.7e-4;
  PairStatistics pair_statistics = PairStatistics::Poisson;
  bool coherence_dephasing = false;

  void validate() const;
  /// True when p_excitation is large enough that a pair-per-trial picture fails.
  bool beyond_perturbative() const { return p_excitation > 0.1; }
};

enum class AnalyzerMode {
  Fixed,   // one (theta1, theta2) setting for the whole run
  Chsh,    // four canonical settings plus a (0, 0) reference, contiguous segments
  Fringe,  // theta1 fixed, theta2 stepped over [0, 180) deg
};

struct AnalyzerConfig {
  AnalyzerMode mode = AnalyzerMode::Chsh;
  double theta1_deg = 0.0;
  double theta2_deg = 0.0;
  int fringe_steps = 8;
  AnalyzerSettings chsh = AnalyzerSettings::canonical();
};

/// Everything that determines a simulated run apart from the seed.
struct ExperimentConfig {
  TimingConfig timing;
  OpticsConfig optics;
  DecoherenceParams decoherence;
  AnalyzerConfig analyzer;
  /// Unset: eta from the Cs branching table.
  std::optional<double> eta_rad;
  double phase_rad = 0.0;
  int windows = 100;

  void validate() const;
  MixingAngle mixing_angle() const;
};

/// Parses flat `key = value unit` text. Dimensioned values require an explicit
/// unit suffix; unknown or repeated keys are rejected. Throws ConfigError with
/// the line number and field name.
ExperimentConfig parse_config(std::string_view text);

ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_config_text(c)) reproduces c exactly.
std::string to_config_text(const ExperimentConfig& config);

/// Parses `value unit` for a quantity of the given dimension. Returns SI
/// (s, Hz, m, T/m), except angles, which are returned in degrees.
enum class Dimension { Time, Frequency, Angle, Length, Gradient };
double parse_quantity(std::string_view text, Dimension dim, std::string_view field);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

}  // namespace dlcz
