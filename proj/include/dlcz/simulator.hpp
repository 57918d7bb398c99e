#pragma once

#include "dlcz/config.hpp"
#include "dlcz/core_model.hpp"
#include "dlcz/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlcz {

enum class Detector : std::uint8_t { T1 = 0, R1 = 1, T2 = 2, R2 = 3 };

std::string_view to_string(Detector d);
/// Throws DataError for anything but T1, R1, T2, R2.
Detector parse_detector(std::string_view s);

inline bool is_field1(Detector d) { return d == Detector::T1 || d == Detector::R1; }

/// Bit i of a click mask is set when detector i fired in the trial.
using ClickMask = std::uint8_t;

inline constexpr ClickMask bit(Detector d) { return ClickMask(1u << static_cast<unsigned>(d)); }
inline constexpr ClickMask kField1Mask = bit(Detector::T1) | bit(Detector::R1);
inline constexpr ClickMask kField2Mask = bit(Detector::T2) | bit(Detector::R2);

struct DetectionEvent {
  std::uint64_t trial_index = 0;
  std::int64_t time_ns = 0;
  Detector detector = Detector::T1;
  std::int32_t theta1_mdeg = 0;
  std::int32_t theta2_mdeg = 0;
  std::int64_t tau_ns = 0;

  bool operator==(const DetectionEvent&) const = default;
};

std::int32_t to_mdeg(double deg);

/// A contiguous block of trials sharing one analyzer setting.
struct Segment {
  std::uint64_t first_trial = 0;
  std::uint64_t trial_count = 0;
  std::int32_t theta1_mdeg = 0;
  std::int32_t theta2_mdeg = 0;
  std::int64_t tau_ns = 0;

  bool operator==(const Segment&) const = default;
};

struct EventLog {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::uint64_t seed = 0;
  std::string run_id;
  ExperimentConfig config;
  std::vector<Segment> segments;
  std::vector<DetectionEvent> events;

  std::uint64_t total_trials() const;
};

/// Sequential (herald-then-collapse) sampling tables for one analyzer setting.
/// Built from partial traces of rho, not from the joint Born probabilities.
struct PortModel {
  double p_t1 = 0.5;                 // field-1 marginal
  double p_t2_given_t1 = 0.5;        // field 2 after a T1 herald
  double p_t2_given_r1 = 0.5;        // field 2 after an R1 herald
  double p_t2_unconditioned = 0.5;   // field 2 when its partner was lost
};

PortModel port_model(const TwoQubitState& state, double theta1_deg, double theta2_deg);

/// Field-2 retrieval efficiency for trials with and without a herald (the two
/// are read out after different storage times).
struct Retrieval {
  double heralded = 1.0;
  double unheralded = 1.0;
};

/// One trial: pair-number draw, field-1 detection and port, collapse, field-2
/// detection at the storage-dependent efficiency, independent background
/// clicks, and coalescing per detector.
ClickMask sample_trial(const OpticsConfig& optics, const PortModel& ports,
                       const Retrieval& retrieval, SplitMix64& rng);

/// Convenience form taking the (already tau-dephased) state and analyzer angles.
ClickMask sample_trial(const OpticsConfig& optics, const TwoQubitState& state, double theta1_deg,
                       double theta2_deg, const Retrieval& retrieval, SplitMix64& rng);

/// Field-1 part of sample_trial only: whether any field-1 detector fires.
/// Consumes the substream identically to sample_trial up to that point.
bool sample_herald(const OpticsConfig& optics, SplitMix64& rng);

/// Per-trial inputs of the sampling kernel.
struct TrialPlan {
  std::span<const PortModel> ports;              // one per segment
  std::span<const std::uint64_t> segment_start;  // first trial of each segment, ascending
  std::uint64_t trial_count = 0;
  Retrieval retrieval;
  std::uint64_t seed = 0;

  std::size_t segment_of(std::uint64_t trial) const;
};

/// Reference implementation: one trial after another.
std::vector<ClickMask> sample_trials_serial(const OpticsConfig& optics, const TrialPlan& plan);

/// OpenMP implementation; bit-identical to the serial one for any thread count.
std::vector<ClickMask> sample_trials_parallel(const OpticsConfig& optics, const TrialPlan& plan,
                                              int threads = 0);

struct SimulationOptions {
  int threads = 0;  // 0: OpenMP default
  bool use_serial_kernel = false;
};

/// Full run: schedule, sample and time-stamp every trial. Deterministic in
/// (config, seed) and independent of the thread count.
EventLog simulate_run(const ExperimentConfig& config, std::uint64_t seed,
                      const SimulationOptions& options = {});

/// FNV-1a over the canonical config text and seed, as 16 hex digits.
std::string make_run_id(const ExperimentConfig& config, std::uint64_t seed);

/// The (theta1, theta2) pairs a run steps through, in segment order.
std::vector<std::pair<double, double>> analyzer_schedule(const AnalyzerConfig& analyzer);

}  // namespace dlcz
