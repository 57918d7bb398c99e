#include "dlcz/scheduler.hpp"

#include "dlcz/errors.hpp"
#include "dlcz/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dlcz {
namespace {

std::int64_t to_ns(double value, double scale) {
  return static_cast<std::int64_t>(std::llround(value * scale));
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field + ": " + message);
}

class Transition {
 public:
  Transition(const TimingNs& t, const SchedulerState& s) : t_(t), s_(s) {}

  StepResult finish() { return {s_, out_}; }

  void emit(std::int64_t at, Action a) {
    at = std::max(at, s_.last_emit_ns + 1);
    s_.last_emit_ns = at;
    s_.clock_ns = std::max(s_.clock_ns, at);
    out_.push({at, a, s_.trial_index});
  }

  void start_window(std::int64_t at) {
    s_.cycle_start_ns = at;
    s_.window_end_ns = at + t_.window;
    s_.trials_in_window = 0;
    emit(at, Action::MotOff);
    s_.phase = Phase::MotOffWait;
    s_.deadline_ns = at + t_.decay_wait;
  }

  void close_trial(std::int64_t at) {
    if (!s_.trial_open) return;
    s_.active_ns += std::min(at, s_.window_end_ns) - s_.trial_start_ns;
    s_.trial_open = false;
    ++s_.trial_index;
  }

  void end_window(std::int64_t at) {
    close_trial(at);
    emit(std::max(at, s_.window_end_ns), Action::MotOn);
    ++s_.window_index;
    ++s_.windows_completed;
    s_.phase = Phase::MotOn;
    s_.deadline_ns = s_.cycle_start_ns + t_.cycle;
  }

  void begin_trial(std::int64_t at) {
    close_trial(at);
    if (s_.trials_in_window >= t_.trials_per_window || at + t_.period > s_.window_end_ns) {
      end_window(at);
      return;
    }
    s_.trial_open = true;
    s_.trial_start_ns = at;
    s_.extension_ns = 0;
    ++s_.trials_in_window;
    ++s_.trials_started;
    if (t_.repump > 0) {
      emit(at, Action::Repump);
      s_.phase = Phase::Repump;
      s_.deadline_ns = at + t_.repump;
    } else {
      write(at);
    }
  }

  void write(std::int64_t at) {
    emit(at, Action::Write);
    s_.write_ns = s_.last_emit_ns;
    s_.phase = Phase::WritePulse;
    s_.deadline_ns = s_.write_ns + t_.pulse;
  }

  void read(std::int64_t at) {
    emit(at, Action::Read);
    s_.phase = Phase::ReadPulse;
    s_.deadline_ns = s_.last_emit_ns + t_.pulse;
  }

  void on_deadline() {
    const std::int64_t now = s_.deadline_ns;
    s_.clock_ns = std::max(s_.clock_ns, now);
    switch (s_.phase) {
      case Phase::MotOn:
        start_window(now);
        break;
      case Phase::MotOffWait:
        begin_trial(now);
        break;
      case Phase::Repump:
        write(now);
        break;
      case Phase::WritePulse:
        s_.phase = Phase::AwaitHerald;
        s_.deadline_ns = s_.write_ns + t_.write_read;
        break;
      case Phase::AwaitHerald:
        read(now);
        break;
      case Phase::Latched:
        if (now >= s_.window_end_ns && s_.herald_ns + t_.tau > s_.window_end_ns) {
          emit(s_.window_end_ns, Action::LatchEnd);
          ++s_.truncated_heralds;
          end_window(s_.window_end_ns);
        } else {
          emit(now, Action::LatchEnd);
          ++s_.successes;
          read(now);
        }
        break;
      case Phase::ReadPulse:
        s_.phase = Phase::InterTrial;
        s_.deadline_ns =
            std::max(now, s_.trial_start_ns + t_.period + s_.extension_ns);
        break;
      case Phase::InterTrial:
        begin_trial(now);
        break;
    }
  }

  void on_herald(std::int64_t at) {
    if (s_.phase != Phase::AwaitHerald) {
      ++s_.stray_heralds;
      return;
    }
    ++s_.heralds;
    s_.herald_ns = std::max(at, s_.write_ns);
    emit(s_.herald_ns, Action::LatchStart);
    s_.herald_ns = s_.last_emit_ns;
    s_.extension_ns = t_.tau;
    s_.phase = Phase::Latched;
    s_.deadline_ns = std::min(s_.herald_ns + t_.tau, std::max(s_.window_end_ns, s_.herald_ns));
  }

 private:
  const TimingNs& t_;
  SchedulerState s_;
  ActionBuffer out_;
};

}  // namespace

TimingConfig TimingConfig::storage_scan() {
  TimingConfig c;
  c.trials_per_window = 1400;
  c.trial_period_us = 1.45;
  c.repump_duration_us = 0.0;
  return c;
}

void TimingConfig::validate() const {
  require(mot_rate_hz > 0.0, "mot_rate", "must be > 0");
  require(mot_off_window_ms > 0.0, "mot_off_window", "must be > 0");
  require(field_decay_wait_ms > 0.0, "field_decay_wait", "must be > 0");
  require(field_decay_wait_ms < mot_off_window_ms, "field_decay_wait",
          "must be shorter than mot_off_window");
  require(mot_off_window_ms * 1e-3 < 1.0 / mot_rate_hz, "mot_off_window",
          "must be shorter than the MOT cycle 1/mot_rate");
  require(trials_per_window > 0, "trials_per_window", "must be > 0");
  require(trial_period_us > 0.0, "trial_period", "must be > 0");
  require(write_read_delay_ns > 0.0, "write_read_delay", "must be > 0");
  require(pulse_duration_ns > 0.0, "pulse_duration", "must be > 0");
  require(repump_duration_us >= 0.0, "repump_duration", "must be >= 0");
  require(tau_us >= 0.0, "tau", "must be >= 0");
  require(tau_max_us > 0.0, "tau_max", "must be > 0");
  require(tau_us <= tau_max_us, "tau", "must not exceed tau_max");
  const TimingNs ns = TimingNs::from(*this);
  require(static_cast<std::int64_t>(trials_per_window) * ns.period <= ns.window - ns.decay_wait,
          "trials_per_window", "trials_per_window * trial_period exceeds the usable window");
  require(ns.repump + ns.write_read + ns.pulse <= ns.period, "trial_period",
          "shorter than repump + write/read delay + pulse");
}

TimingNs TimingNs::from(const TimingConfig& c) {
  TimingNs t;
  t.cycle = to_ns(1.0 / c.mot_rate_hz, 1e9);
  t.window = to_ns(c.mot_off_window_ms, 1e6);
  t.decay_wait = to_ns(c.field_decay_wait_ms, 1e6);
  t.period = to_ns(c.trial_period_us, 1e3);
  t.write_read = to_ns(c.write_read_delay_ns, 1.0);
  t.pulse = to_ns(c.pulse_duration_ns, 1.0);
  t.repump = to_ns(c.repump_duration_us, 1e3);
  t.tau = to_ns(c.tau_us, 1e3);
  t.trials_per_window = c.trials_per_window;
  return t;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Write: return "WRITE";
    case Action::Read: return "READ";
    case Action::LatchStart: return "LATCH_START";
    case Action::LatchEnd: return "LATCH_END";
    case Action::Repump: return "REPUMP";
    case Action::MotOn: return "MOT_ON";
    case Action::MotOff: return "MOT_OFF";
  }
  return "?";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::MotOffWait: return "MotOffWait";
    case Phase::Repump: return "Repump";
    case Phase::WritePulse: return "WritePulse";
    case Phase::AwaitHerald: return "AwaitHerald";
    case Phase::Latched: return "Latched";
    case Phase::ReadPulse: return "ReadPulse";
    case Phase::InterTrial: return "InterTrial";
    case Phase::MotOn: return "MotOn";
  }
  return "?";
}

StepResult step(const TimingNs& timing, const SchedulerState& state, const SchedulerEvent& event) {
  Transition tr(timing, state);
  if (event.kind == EventKind::Herald) {
    tr.on_herald(event.time_ns);
  } else if (event.time_ns >= state.deadline_ns) {
    tr.on_deadline();
  }
  return tr.finish();
}

double ScheduleTrace::mean_time_per_success_us() const {
  if (successes == 0) return 0.0;
  return static_cast<double>(active_ns) * 1e-3 / static_cast<double>(successes);
}

ScheduleTrace run_schedule(const TimingConfig& config, const HeraldOracle& herald,
                           const ScheduleOptions& options) {
  config.validate();
  if (options.windows <= 0) throw ConfigError("windows: must be > 0");
  const TimingNs timing = TimingNs::from(config);

  ScheduleTrace trace;
  SchedulerState state;
  TrialTiming current;
  bool have_trial = false;
  const auto flush_trial = [&] {
    if (have_trial && options.keep_trials) trace.trials.push_back(current);
    if (have_trial && options.on_trial) options.on_trial(current);
    have_trial = false;
  };

  while (state.windows_completed < static_cast<std::uint64_t>(options.windows)) {
    StepResult r = step(timing, state, {EventKind::Tick, state.deadline_ns});
    const Phase before = state.phase;
    state = r.state;
    for (const TraceRecord& rec : r.actions) {
      if (options.keep_records) trace.records.push_back(rec);
      if (rec.action == Action::Write) {
        flush_trial();
        current = TrialTiming{rec.trial_index, state.window_index, rec.clock_ns, -1, -1, false};
        have_trial = true;
      } else if (rec.action == Action::Read && have_trial) {
        current.read_ns = rec.clock_ns;
      }
    }
    if (before == Phase::WritePulse && state.phase == Phase::AwaitHerald &&
        herald(state.trial_index)) {
      StepResult h = step(timing, state, {EventKind::Herald, state.write_ns + timing.pulse});
      state = h.state;
      for (const TraceRecord& rec : h.actions) {
        if (options.keep_records) trace.records.push_back(rec);
      }
      current.heralded = true;
      current.herald_ns = state.herald_ns;
    }
  }
  flush_trial();

  trace.trials_run = state.trials_started;
  trace.heralds = state.heralds;
  trace.successes = state.successes;
  trace.truncated_heralds = state.truncated_heralds;
  trace.stray_heralds = state.stray_heralds;
  trace.active_ns = state.active_ns;
  return trace;
}

ScheduleTrace run_schedule(const TimingConfig& config, double p1, std::uint64_t seed,
                           const ScheduleOptions& options) {
  if (!(p1 >= 0.0 && p1 <= 1.0)) throw ConfigError("p1: must lie in [0,1]");
  return run_schedule(
      config,
      [&](std::uint64_t k) {
        SplitMix64 rng = substream(seed, k);
        return bernoulli(rng, p1);
      },
      options);
}

double rate_gain(double p1, double trial_period_us, double tau_max_us, double tau_us) {
  if (!(p1 > 0.0 && p1 <= 1.0)) throw ConfigError("p1: must lie in (0,1]");
  const double unconditional = tau_max_us / p1;
  const double conditional = trial_period_us / p1 + tau_us;
  return unconditional / conditional;
}

}  // namespace dlcz
