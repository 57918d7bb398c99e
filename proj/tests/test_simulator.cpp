#include "dlcz/analysis.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/simulator.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace dlcz;

namespace {

OpticsConfig lossless_single_pair() {
  OpticsConfig o;
  o.p_excitation = 1.0;
  o.eta1 = 1.0;
  o.eta2_base = 1.0;
  o.bg1 = 0.0;
  o.bg2 = 0.0;
  o.pair_statistics = PairStatistics::Forced;
  return o;
}

std::array<std::uint64_t, 4> port_counts(const OpticsConfig& optics, const TwoQubitState& state,
                                         double t1, double t2, int trials, std::uint64_t seed) {
  std::array<std::uint64_t, 4> counts{};
  const PortModel ports = port_model(state, t1, t2);
  for (int k = 0; k < trials; ++k) {
    SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(k));
    const ClickMask m = sample_trial(optics, ports, {1.0, 1.0}, rng);
    const int a = (m & bit(Detector::T1)) ? 0 : 1;
    const int b = (m & bit(Detector::T2)) ? 0 : 1;
    ++counts[2 * a + b];
  }
  return counts;
}

ExperimentConfig small_run() {
  ExperimentConfig c;
  c.windows = 10;
  c.optics.p_excitation = 0.05;
  c.optics.eta1 = 0.4;
  c.optics.eta2_base = 0.4;
  c.timing.tau_us = 2.0;
  return c;
}

}  // namespace

TEST(Detector, Names) {
  for (auto d : {Detector::T1, Detector::R1, Detector::T2, Detector::R2}) {
    EXPECT_EQ(parse_detector(to_string(d)), d);
  }
  EXPECT_THROW(parse_detector("X9"), DataError);
  EXPECT_TRUE(is_field1(Detector::R1));
  EXPECT_FALSE(is_field1(Detector::T2));
}

TEST(PortModel, SequentialProductsEqualBornProbabilities) {
  gen::Source src(31);
  for (int i = 0; i < 200; ++i) {
    const TwoQubitState s(src.mixed_state(), 0.5);
    const double t1 = src.angle_deg(), t2 = src.angle_deg();
    const PortModel m = port_model(s, t1, t2);
    const CoincidenceProbs p = born_coincidence_probs(s, t1, t2);
    EXPECT_NEAR(m.p_t1 * m.p_t2_given_t1, p.tt, 1e-12);
    EXPECT_NEAR(m.p_t1 * (1 - m.p_t2_given_t1), p.tr, 1e-12);
    EXPECT_NEAR((1 - m.p_t1) * m.p_t2_given_r1, p.rt, 1e-12);
    EXPECT_NEAR((1 - m.p_t1) * (1 - m.p_t2_given_r1), p.rr, 1e-12);
    EXPECT_NEAR(m.p_t2_unconditioned, p.tt + p.rt, 1e-12);
  }
}

TEST(SampleTrial, IdealLosslessMatchesBornOracle) {
  const double eta = 0.86 * std::numbers::pi / 4;
  const auto state = ideal_state({eta}, 0.0, 0.5);
  const auto counts = port_counts(lossless_single_pair(), state, 0.0, 0.0, 100000, 1);
  const auto p = oracle::born_pure(eta, 0.0, 0.0, 0.0);
  int dof = 0;
  const double chi2 = oracle::pearson_chi2(counts, p, dof);
  EXPECT_EQ(counts[1] + counts[2], 0u);
  EXPECT_GT(oracle::chi2_survival(chi2, dof), 1e-3) << chi2;
}

TEST(SampleTrial, RandomSettingsMatchBornOracle) {
  gen::Source src(32);
  for (int i = 0; i < 5; ++i) {
    const double eta = src.eta(), phase = src.phase(), d = src.uniform(0, 1);
    const double t1 = src.angle_deg(), t2 = src.angle_deg();
    const auto state = apply_dephasing(ideal_state({eta}, phase, 0.5), d);
    const auto counts = port_counts(lossless_single_pair(), state, t1, t2, 50000, 100 + i);
    int dof = 0;
    const double chi2 = oracle::pearson_chi2(counts, oracle::born_dephased(eta, phase, d, t1, t2), dof);
    EXPECT_GT(oracle::chi2_survival(chi2, dof), 1e-3) << i << " chi2=" << chi2;
  }
}

TEST(SampleTrial, HeraldOracleAgreesWithFullSampler) {
  gen::Source src(33);
  OpticsConfig o;
  o.p_excitation = 0.3;
  o.eta1 = 0.5;
  o.bg1 = 0.01;
  o.bg2 = 0.01;
  const auto state = ideal_state({0.6}, 0.3, 0.5);
  for (int k = 0; k < 20000; ++k) {
    const PortModel ports = port_model(state, src.angle_deg(), src.angle_deg());
    SplitMix64 a = substream(9, k), b = substream(9, k);
    const bool herald = sample_herald(o, a);
    const ClickMask m = sample_trial(o, ports, {0.3, 0.9}, b);
    ASSERT_EQ(herald, (m & kField1Mask) != 0) << k;
  }
}

TEST(SampleTrial, PairStatisticsMeans) {
  for (auto stats : {PairStatistics::Poisson, PairStatistics::Thermal, PairStatistics::Single}) {
    OpticsConfig o = lossless_single_pair();
    o.pair_statistics = stats;
    o.p_excitation = 0.2;
    const PortModel ports = port_model(ideal_state({0.7}, 0.0, 0.5), 0, 0);
    int heralds = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      SplitMix64 rng = substream(4, k);
      heralds += (sample_trial(o, ports, {1, 1}, rng) & kField1Mask) != 0;
    }
    // P(n > 0) for each distribution with mean 0.2.
    const double expected = stats == PairStatistics::Poisson   ? 1 - std::exp(-0.2)
                            : stats == PairStatistics::Thermal ? 0.2 / 1.2
                                                               : 0.2;
    EXPECT_NEAR(heralds / double(n), expected, 5 * std::sqrt(expected * (1 - expected) / n));
  }
}

TEST(SampleTrial, NothingWithoutLight) {
  OpticsConfig o;
  o.p_excitation = 0.0;
  o.bg1 = 0.0;
  o.bg2 = 0.0;
  const PortModel ports;
  for (int k = 0; k < 1000; ++k) {
    SplitMix64 rng = substream(1, k);
    EXPECT_EQ(sample_trial(o, ports, {1, 1}, rng), 0);
  }
}

TEST(Kernels, ParallelIdenticalToSerial) {
  const auto state = ideal_state({0.7}, 0.0, 0.5);
  std::vector<PortModel> ports{port_model(state, 0, 0), port_model(state, 30, 60),
                               port_model(state, -22.5, 45)};
  std::vector<std::uint64_t> starts{0, 12345, 40000};
  OpticsConfig o;
  o.p_excitation = 0.1;
  o.eta1 = 0.5;
  o.eta2_base = 0.5;
  TrialPlan plan{ports, starts, 77777, {0.8, 0.95}, 1234};
  const auto serial = sample_trials_serial(o, plan);
  for (int threads : {1, 2, 3, 4, 7}) {
    EXPECT_EQ(sample_trials_parallel(o, plan, threads), serial) << threads;
  }
}

TEST(SimulateRun, DeterministicAcrossKernelsAndThreads) {
  const ExperimentConfig c = small_run();
  const EventLog a = simulate_run(c, 5);
  const EventLog b = simulate_run(c, 5, {1, false});
  const EventLog s = simulate_run(c, 5, {0, true});
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.events, s.events);
  EXPECT_EQ(a.segments, s.segments);
  EXPECT_EQ(a.run_id, s.run_id);
  EXPECT_NE(simulate_run(c, 6).events, a.events);
  EXPECT_NE(make_run_id(c, 5), make_run_id(c, 6));
}

TEST(SimulateRun, ChshSegmentsAndEventInvariants) {
  const ExperimentConfig c = small_run();
  const EventLog log = simulate_run(c, 8);
  ASSERT_EQ(log.segments.size(), 5u);
  std::uint64_t next = 0;
  for (const auto& s : log.segments) {
    EXPECT_EQ(s.first_trial, next);
    next += s.trial_count;
    EXPECT_EQ(s.tau_ns, 2000);
  }
  EXPECT_EQ(log.total_trials(), next);
  EXPECT_EQ(log.segments[4].theta1_mdeg, 0);
  EXPECT_EQ(log.segments[0].theta1_mdeg, -22500);
  EXPECT_EQ(log.segments[2].theta2_mdeg, 45000);

  ASSERT_FALSE(log.events.empty());
  std::int64_t herald_time = -1;
  std::uint64_t herald_trial = ~0ull;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    if (i > 0) ASSERT_LE(log.events[i - 1].time_ns, e.time_ns);
    ASSERT_LT(e.trial_index, log.total_trials());
    const Segment* seg = nullptr;
    for (const auto& s : log.segments) {
      if (e.trial_index >= s.first_trial && e.trial_index < s.first_trial + s.trial_count) seg = &s;
    }
    ASSERT_NE(seg, nullptr);
    EXPECT_EQ(e.theta1_mdeg, seg->theta1_mdeg);
    EXPECT_EQ(e.theta2_mdeg, seg->theta2_mdeg);
    if (is_field1(e.detector)) {
      herald_time = e.time_ns;
      herald_trial = e.trial_index;
    } else if (e.trial_index == herald_trial) {
      const std::int64_t dt = e.time_ns - herald_time;
      EXPECT_GE(dt, 2000);
      EXPECT_LE(dt, 2001);
    }
  }
}

TEST(SimulateRun, FringeSegments) {
  ExperimentConfig c = small_run();
  c.analyzer.mode = AnalyzerMode::Fringe;
  c.analyzer.fringe_steps = 6;
  c.windows = 12;
  const EventLog log = simulate_run(c, 2);
  ASSERT_EQ(log.segments.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(log.segments[i].theta2_mdeg, 30000 * i);
}

TEST(SimulateRun, DarkRunHasNoEvents) {
  ExperimentConfig c;
  c.analyzer.mode = AnalyzerMode::Fixed;
  c.windows = 1;
  c.optics.p_excitation = 0.0;
  c.optics.bg2 = 0.0;
  const EventLog log = simulate_run(c, 1);
  EXPECT_TRUE(log.events.empty());
  EXPECT_EQ(log.total_trials(), 1100u);
}

TEST(SimulateRun, BackgroundOnlyIsUncorrelated) {
  ExperimentConfig c;
  c.analyzer.mode = AnalyzerMode::Fixed;
  c.windows = 200;
  c.optics.p_excitation = 0.0;
  c.optics.bg1 = 0.02;
  c.optics.bg2 = 0.02;
  const EventLog log = simulate_run(c, 3);
  const auto stats = estimate_g12(log);
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_NEAR(stats[0].g12, 1.0, 3 * stats[0].sigma_g12);
  EXPECT_NEAR(stats[0].g12_a, 1.0, 3 * stats[0].sigma_g12_a);
}

TEST(SimulateRun, StorageTimeLowersConditionalRetrieval) {
  ExperimentConfig c = small_run();
  c.analyzer.mode = AnalyzerMode::Fixed;
  c.optics.bg2 = 0.0;
  c.windows = 40;
  const auto pc = [&](double tau) {
    c.timing.tau_us = tau;
    return estimate_g12(simulate_run(c, 4))[0];
  };
  const auto early = pc(0.4);
  const auto late = pc(20.7);
  const auto& t = cesium_coherence_table();
  const double ratio = std::pow(dephasing_factor(20.7, c.decoherence, t), 2) /
                       std::pow(dephasing_factor(0.4, c.decoherence, t), 2);
  EXPECT_NEAR(late.p_c / early.p_c, ratio,
              4 * ratio * std::hypot(late.sigma_p_c / late.p_c, early.sigma_p_c / early.p_c));
}
