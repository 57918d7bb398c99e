#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace dlcz {

/// Experiment timing. Defaults are the short-storage configuration
/// (1100 trials of 2 us with 1 us repumping).
struct TimingConfig {
  double mot_rate_hz = 40.0;
  double mot_off_window_ms = 6.0;
  double field_decay_wait_ms = 3.8;
  int trials_per_window = 1100;
  double trial_period_us = 2.0;
  double write_read_delay_ns = 400.0;
  double pulse_duration_ns = 30.0;
  double repump_duration_us = 1.0;
  double tau_us = 0.4;
  double tau_max_us = 40.0;

  /// Storage-scan configuration: no repumping, 1400 trials of 1.45 us.
  static TimingConfig storage_scan();

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Integer-nanosecond view of a TimingConfig.
struct TimingNs {
  std::int64_t cycle = 0;
  std::int64_t window = 0;
  std::int64_t decay_wait = 0;
  std::int64_t period = 0;
  std::int64_t write_read = 0;
  std::int64_t pulse = 0;
  std::int64_t repump = 0;
  std::int64_t tau = 0;
  int trials_per_window = 0;

  static TimingNs from(const TimingConfig& config);
};

enum class Phase {
  MotOffWait,
  Repump,
  WritePulse,
  AwaitHerald,
  Latched,
  ReadPulse,
  InterTrial,
  MotOn,
};

enum class Action : std::uint8_t { Write, Read, LatchStart, LatchEnd, Repump, MotOn, MotOff };

std::string_view to_string(Action a);
std::string_view to_string(Phase p);

struct TraceRecord {
  std::int64_t clock_ns = 0;
  Action action = Action::Write;
  std::uint64_t trial_index = 0;

  bool operator==(const TraceRecord&) const = default;
};

/// Memory Start controller state. `deadline_ns` is the time of the next
/// scheduled transition; between transitions the state is frozen.
struct SchedulerState {
  Phase phase = Phase::MotOn;
  std::int64_t clock_ns = 0;
  std::int64_t deadline_ns = 0;
  std::uint64_t trial_index = 0;  // current trial (next trial once it ends)
  std::uint64_t window_index = 0;
  std::int64_t cycle_start_ns = 0;
  std::int64_t window_end_ns = 0;
  std::int64_t trial_start_ns = 0;
  std::int64_t write_ns = 0;
  std::int64_t herald_ns = 0;
  std::int64_t extension_ns = 0;
  std::int64_t last_emit_ns = -1;
  int trials_in_window = 0;
  bool trial_open = false;

  std::uint64_t trials_started = 0;
  std::uint64_t heralds = 0;
  std::uint64_t successes = 0;
  std::uint64_t truncated_heralds = 0;
  std::uint64_t stray_heralds = 0;
  std::uint64_t windows_completed = 0;
  std::int64_t active_ns = 0;
};

enum class EventKind { Tick, Herald };

struct SchedulerEvent {
  EventKind kind = EventKind::Tick;
  std::int64_t time_ns = 0;
};

/// Actions emitted by one step; a step never emits more than four.
struct ActionBuffer {
  std::array<TraceRecord, 4> items{};
  int size = 0;

  void push(const TraceRecord& r) { items[size++] = r; }
  const TraceRecord* begin() const { return items.data(); }
  const TraceRecord* end() const { return items.data() + size; }
};

struct StepResult {
  SchedulerState state;
  ActionBuffer actions;
};

/// Advances the controller. A Tick at or past the deadline performs the
/// scheduled transition; a Herald latches the sequence when the controller is
/// awaiting one and is otherwise counted as stray and ignored.
StepResult step(const TimingNs& timing, const SchedulerState& state, const SchedulerEvent& event);

/// Per-trial timing as seen by the detectors.
struct TrialTiming {
  std::uint64_t trial_index = 0;
  std::uint64_t window_index = 0;
  std::int64_t write_ns = 0;
  std::int64_t herald_ns = -1;  // -1 when not heralded
  std::int64_t read_ns = -1;    // -1 when the read was truncated away
  bool heralded = false;
};

struct ScheduleOptions {
  int windows = 1;
  bool keep_records = true;
  bool keep_trials = false;
  /// Called once per finished trial, in trial order.
  std::function<void(const TrialTiming&)> on_trial;
};

struct ScheduleTrace {
  std::vector<TraceRecord> records;
  std::vector<TrialTiming> trials;
  std::uint64_t trials_run = 0;
  std::uint64_t heralds = 0;
  std::uint64_t successes = 0;
  std::uint64_t truncated_heralds = 0;
  std::uint64_t stray_heralds = 0;
  std::int64_t active_ns = 0;

  /// Active (MOT-off trial) time per completed read-out, in us.
  double mean_time_per_success_us() const;
};

/// Herald outcome for trial k; queried once per trial, in trial order.
using HeraldOracle = std::function<bool(std::uint64_t trial_index)>;

ScheduleTrace run_schedule(const TimingConfig& config, const HeraldOracle& herald,
                           const ScheduleOptions& options);

/// Bernoulli(p1) heralds drawn from per-trial substreams of `seed`.
ScheduleTrace run_schedule(const TimingConfig& config, double p1, std::uint64_t seed,
                           const ScheduleOptions& options);

/// Repetition-rate gain of conditional gating over padding every trial to
/// tau_max: (tau_max / p1) / (trial_period / p1 + tau).
double rate_gain(double p1, double trial_period_us, double tau_max_us, double tau_us = 0.0);

}  // namespace dlcz
