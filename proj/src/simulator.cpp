#include "dlcz/simulator.hpp"

#include "dlcz/decoherence.hpp"
#include "dlcz/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dlcz {
namespace {

int draw_pairs(const OpticsConfig& optics, SplitMix64& rng) {
  switch (optics.pair_statistics) {
    case PairStatistics::Poisson:
      return poisson(rng, optics.p_excitation);
    case PairStatistics::Thermal:
      return thermal(rng, optics.p_excitation);
    case PairStatistics::Single:
      return bernoulli(rng, optics.p_excitation) ? 1 : 0;
    case PairStatistics::Forced:
      return 1;
  }
  return 0;
}

/// Field-1 outcome of one trial, kept by category so field 2 can be collapsed
/// per pair without storing the pairs.
struct Field1Outcome {
  int heralded_t = 0;  // pairs whose field-1 photon reached T1
  int heralded_r = 0;  // ... reached R1
  int lost = 0;        // field-1 photon not detected
  ClickMask mask = 0;
};

Field1Outcome sample_field1(const OpticsConfig& optics, double p_t1, SplitMix64& rng) {
  Field1Outcome out;
  const int n = draw_pairs(optics, rng);
  for (int i = 0; i < n; ++i) {
    if (bernoulli(rng, optics.eta1)) {
      if (uniform01(rng) < p_t1) {
        ++out.heralded_t;
      } else {
        ++out.heralded_r;
      }
    } else {
      ++out.lost;
    }
  }
  if (out.heralded_t > 0) out.mask |= bit(Detector::T1);
  if (out.heralded_r > 0) out.mask |= bit(Detector::R1);
  if (bernoulli(rng, optics.bg1)) out.mask |= bit(Detector::T1);
  if (bernoulli(rng, optics.bg1)) out.mask |= bit(Detector::R1);
  return out;
}

ClickMask sample_field2(int pairs, double efficiency, double p_t2, SplitMix64& rng) {
  ClickMask mask = 0;
  for (int i = 0; i < pairs; ++i) {
    if (bernoulli(rng, efficiency)) {
      mask |= (uniform01(rng) < p_t2) ? bit(Detector::T2) : bit(Detector::R2);
    }
  }
  return mask;
}

/// 2x2 block <u| (x) 1 applied to rho, i.e. the unnormalized field-2 state
/// after field 1 is projected onto u.
Eigen::Matrix2cd project_field1(const DensityMatrix& rho, const Eigen::Vector2d& u) {
  Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
  for (int b = 0; b < 2; ++b) {
    for (int bp = 0; bp < 2; ++bp) {
      std::complex<double> acc = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int ap = 0; ap < 2; ++ap) {
          acc += u(a) * rho(2 * a + b, 2 * ap + bp) * u(ap);
        }
      }
      out(b, bp) = acc;
    }
  }
  return out;
}

double expect(const Eigen::Matrix2cd& m, const Eigen::Vector2d& v) {
  return std::real(v.cast<std::complex<double>>().dot(m * v.cast<std::complex<double>>()));
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.5; }

std::int64_t ns_from_us(double us) { return static_cast<std::int64_t>(std::llround(us * 1e3)); }

}  // namespace

std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::T1: return "T1";
    case Detector::R1: return "R1";
    case Detector::T2: return "T2";
    case Detector::R2: return "R2";
  }
  return "?";
}

Detector parse_detector(std::string_view s) {
  if (s == "T1") return Detector::T1;
  if (s == "R1") return Detector::R1;
  if (s == "T2") return Detector::T2;
  if (s == "R2") return Detector::R2;
  throw DataError("unknown detector '" + std::string(s) + "'");
}

std::int32_t to_mdeg(double deg) { return static_cast<std::int32_t>(std::llround(deg * 1000.0)); }

std::uint64_t EventLog::total_trials() const {
  std::uint64_t n = 0;
  for (const auto& s : segments) n += s.trial_count;
  return n;
}

PortModel port_model(const TwoQubitState& state, double theta1_deg, double theta2_deg) {
  const auto f1 = field1_ports(theta1_deg);
  const auto f2 = field2_ports(theta2_deg);
  const Eigen::Matrix2cd after_t = project_field1(state.rho(), f1[0]);
  const Eigen::Matrix2cd after_r = project_field1(state.rho(), f1[1]);
  const Eigen::Matrix2cd reduced2 = after_t + after_r;  // Tr_1 rho

  const double p_t = std::real(after_t.trace());
  const double p_r = std::real(after_r.trace());
  PortModel m;
  m.p_t1 = safe_ratio(p_t, p_t + p_r);
  m.p_t2_given_t1 = safe_ratio(expect(after_t, f2[0]), p_t);
  m.p_t2_given_r1 = safe_ratio(expect(after_r, f2[0]), p_r);
  m.p_t2_unconditioned = safe_ratio(expect(reduced2, f2[0]), std::real(reduced2.trace()));
  return m;
}

bool sample_herald(const OpticsConfig& optics, SplitMix64& rng) {
  return sample_field1(optics, 0.5, rng).mask != 0;
}

ClickMask sample_trial(const OpticsConfig& optics, const PortModel& ports,
                       const Retrieval& retrieval, SplitMix64& rng) {
  const Field1Outcome f1 = sample_field1(optics, ports.p_t1, rng);
  const bool heralded = f1.mask != 0;
  const double eff = optics.eta2_base * (heralded ? retrieval.heralded : retrieval.unheralded);

  ClickMask mask = f1.mask;
  mask |= sample_field2(f1.heralded_t, eff, ports.p_t2_given_t1, rng);
  mask |= sample_field2(f1.heralded_r, eff, ports.p_t2_given_r1, rng);
  mask |= sample_field2(f1.lost, eff, ports.p_t2_unconditioned, rng);
  if (bernoulli(rng, optics.bg2)) mask |= bit(Detector::T2);
  if (bernoulli(rng, optics.bg2)) mask |= bit(Detector::R2);
  return mask;
}

ClickMask sample_trial(const OpticsConfig& optics, const TwoQubitState& state, double theta1_deg,
                       double theta2_deg, const Retrieval& retrieval, SplitMix64& rng) {
  return sample_trial(optics, port_model(state, theta1_deg, theta2_deg), retrieval, rng);
}

std::size_t TrialPlan::segment_of(std::uint64_t trial) const {
  const auto it = std::upper_bound(segment_start.begin(), segment_start.end(), trial);
  return it == segment_start.begin() ? 0 : static_cast<std::size_t>(it - segment_start.begin()) - 1;
}

std::vector<ClickMask> sample_trials_serial(const OpticsConfig& optics, const TrialPlan& plan) {
  std::vector<ClickMask> masks(plan.trial_count);
  for (std::uint64_t k = 0; k < plan.trial_count; ++k) {
    SplitMix64 rng = substream(plan.seed, k);
    masks[k] = sample_trial(optics, plan.ports[plan.segment_of(k)], plan.retrieval, rng);
  }
  return masks;
}

std::vector<ClickMask> sample_trials_parallel(const OpticsConfig& optics, const TrialPlan& plan,
                                              int threads) {
  std::vector<ClickMask> masks(plan.trial_count);
  const auto n = static_cast<std::int64_t>(plan.trial_count);
#ifdef _OPENMP
  const int team = threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
#endif
#pragma omp parallel num_threads(team)
  {
    // Segment lookups are monotone within a static chunk; cache the current one.
    std::size_t seg = 0;
    std::uint64_t seg_end = 0;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::uint64_t>(i);
      if (k >= seg_end || k < plan.segment_start[seg]) {
        seg = plan.segment_of(k);
        seg_end = seg + 1 < plan.segment_start.size() ? plan.segment_start[seg + 1]
                                                      : plan.trial_count;
      }
      SplitMix64 rng = substream(plan.seed, k);
      masks[k] = sample_trial(optics, plan.ports[seg], plan.retrieval, rng);
    }
  }
  return masks;
}

std::vector<std::pair<double, double>> analyzer_schedule(const AnalyzerConfig& analyzer) {
  switch (analyzer.mode) {
    case AnalyzerMode::Fixed:
      return {{analyzer.theta1_deg, analyzer.theta2_deg}};
    case AnalyzerMode::Chsh: {
      const auto& s = analyzer.chsh;
      return {{s.theta1, s.theta2},
              {s.theta1p, s.theta2},
              {s.theta1, s.theta2p},
              {s.theta1p, s.theta2p},
              {0.0, 0.0}};
    }
    case AnalyzerMode::Fringe: {
      std::vector<std::pair<double, double>> out;
      for (int i = 0; i < analyzer.fringe_steps; ++i) {
        out.emplace_back(analyzer.theta1_deg, 180.0 * i / analyzer.fringe_steps);
      }
      return out;
    }
  }
  return {};
}

std::string make_run_id(const ExperimentConfig& config, std::uint64_t seed) {
  const std::string text = to_config_text(config) + "seed = " + std::to_string(seed) + "\n";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

EventLog simulate_run(const ExperimentConfig& config, std::uint64_t seed,
                      const SimulationOptions& options) {
  config.validate();

  const auto settings = analyzer_schedule(config.analyzer);
  const auto n_segments = static_cast<std::uint64_t>(settings.size());
  const auto windows = static_cast<std::uint64_t>(config.windows);
  const auto segment_of_window = [&](std::uint64_t w) { return w * n_segments / windows; };

  // Pass 1: the schedule only needs herald outcomes, which do not depend on
  // the analyzer setting.
  ScheduleOptions sched;
  sched.windows = config.windows;
  sched.keep_records = false;
  std::vector<std::uint64_t> segment_start(n_segments, 0);
  std::vector<bool> seen(n_segments, false);
  std::uint64_t trial_count = 0;
  sched.on_trial = [&](const TrialTiming& t) {
    const auto s = segment_of_window(t.window_index);
    if (!seen[s]) {
      seen[s] = true;
      segment_start[s] = t.trial_index;
    }
    trial_count = t.trial_index + 1;
  };
  run_schedule(
      config.timing,
      [&](std::uint64_t k) {
        SplitMix64 rng = substream(seed, k);
        return sample_herald(config.optics, rng);
      },
      sched);

  // Pass 2: per-trial sampling.
  const TwoQubitState ideal = ideal_state(config.mixing_angle(), config.phase_rad, 0.5);
  const CoherenceTable& table = cesium_coherence_table();
  const double d_tau = dephasing_factor(config.timing.tau_us, config.decoherence, table);
  const double d_unheralded =
      dephasing_factor(config.timing.write_read_delay_ns * 1e-3, config.decoherence, table);
  const TwoQubitState state = config.optics.coherence_dephasing ? apply_dephasing(ideal, d_tau)
                                                                : ideal;

  std::vector<PortModel> ports;
  for (const auto& [t1, t2] : settings) ports.push_back(port_model(state, t1, t2));

  TrialPlan plan;
  plan.ports = ports;
  plan.segment_start = segment_start;
  plan.trial_count = trial_count;
  plan.retrieval = {d_tau * d_tau, d_unheralded * d_unheralded};
  plan.seed = seed;
  const std::vector<ClickMask> masks = options.use_serial_kernel
                                           ? sample_trials_serial(config.optics, plan)
                                           : sample_trials_parallel(config.optics, plan,
                                                                    options.threads);

  EventLog log;
  log.seed = seed;
  log.run_id = make_run_id(config, seed);
  log.config = config;
  const std::int64_t tau_ns = ns_from_us(config.timing.tau_us);
  for (std::uint64_t s = 0; s < n_segments; ++s) {
    const std::uint64_t end = s + 1 < n_segments ? segment_start[s + 1] : trial_count;
    log.segments.push_back({segment_start[s], end - segment_start[s],
                            to_mdeg(settings[s].first), to_mdeg(settings[s].second), tau_ns});
  }

  // Pass 3: replay the (identical) schedule and time-stamp the clicks.
  sched.on_trial = [&](const TrialTiming& t) {
    const ClickMask mask = masks[t.trial_index];
    if (mask == 0) return;
    const Segment& seg = log.segments[plan.segment_of(t.trial_index)];
    const auto push = [&](Detector d, std::int64_t at) {
      if (mask & bit(d)) {
        log.events.push_back({t.trial_index, at, d, seg.theta1_mdeg, seg.theta2_mdeg, tau_ns});
      }
    };
    if (mask & kField1Mask) {
      push(Detector::T1, t.herald_ns);
      push(Detector::R1, t.herald_ns);
    }
    if (t.read_ns >= 0) {
      push(Detector::T2, t.read_ns);
      push(Detector::R2, t.read_ns);
    }
  };
  run_schedule(
      config.timing,
      [&](std::uint64_t k) { return (masks[k] & kField1Mask) != 0; },
      sched);
  return log;
}

}  // namespace dlcz
