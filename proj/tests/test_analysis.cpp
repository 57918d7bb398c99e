#include "dlcz/analysis.hpp"
#include "dlcz/errors.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace dlcz;

namespace {

constexpr std::int64_t kTrialSpacing = 1000;

// One segment at (theta1, theta2, tau); `clicks` lists (trial, detector).
EventLog build_log(std::uint64_t trials, std::vector<std::pair<std::uint64_t, Detector>> clicks,
                   std::int32_t t1 = 0, std::int32_t t2 = 0, std::int64_t tau = 100) {
  EventLog log;
  log.segments.push_back({0, trials, t1, t2, tau});
  std::stable_sort(clicks.begin(), clicks.end(), [](auto& a, auto& b) {
    return a.first != b.first ? a.first < b.first : is_field1(a.second) > is_field1(b.second);
  });
  for (auto [trial, d] : clicks) {
    const std::int64_t t = static_cast<std::int64_t>(trial) * kTrialSpacing + (is_field1(d) ? 0 : tau);
    log.events.push_back({trial, t, d, t1, t2, tau});
  }
  return log;
}

CoincidenceCounts counts(std::uint64_t tt, std::uint64_t tr, std::uint64_t rt, std::uint64_t rr) {
  CoincidenceCounts c;
  c.c_tt = tt;
  c.c_tr = tr;
  c.c_rt = rt;
  c.c_rr = rr;
  return c;
}

double born_e(const TwoQubitState& s, double t1, double t2) {
  const auto p = born_coincidence_probs(s, t1, t2);
  return p.tt + p.rr - p.tr - p.rt;
}

}  // namespace

TEST(Coincidences, SameTrialCounts) {
  const auto c = count_coincidences(build_log(10, {{3, Detector::T1}, {3, Detector::T2}}));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].c_tt, 1u);
  EXPECT_EQ(c[0].total(), 1u);
  EXPECT_EQ(c[0].n_trials, 10u);
}

TEST(Coincidences, DifferentTrialsDoNotCount) {
  const auto c = count_coincidences(build_log(10, {{3, Detector::T1}, {4, Detector::T2}}));
  EXPECT_EQ(c[0].total(), 0u);
}

TEST(Coincidences, WindowSelectsDelay) {
  EventLog log = build_log(10, {{3, Detector::R1}, {3, Detector::R2}});
  EXPECT_EQ(count_coincidences(log, 5)[0].c_rr, 1u);
  log.events[1].time_ns += 20;
  EXPECT_EQ(count_coincidences(log, 5)[0].c_rr, 0u);
  EXPECT_EQ(count_coincidences(log, 50)[0].c_rr, 1u);
  EXPECT_EQ(count_coincidences(log)[0].c_rr, 1u);
  EXPECT_THROW(count_coincidences(log, 0), DataError);
}

TEST(Coincidences, MalformedLogsRejected) {
  EventLog unsorted = build_log(10, {{3, Detector::T1}, {5, Detector::T1}});
  std::swap(unsorted.events[0].time_ns, unsorted.events[1].time_ns);
  EXPECT_THROW(summarize(unsorted), DataError);
  EXPECT_THROW(summarize(build_log(10, {{12, Detector::T1}})), DataError);
  EventLog mixed = build_log(10, {{3, Detector::T1}, {3, Detector::T2}});
  mixed.events[1].theta2_mdeg = 45000;
  EXPECT_THROW(summarize(mixed), DataError);
}

TEST(Coincidences, EmptyGroupsOmitted) {
  EventLog log = build_log(10, {});
  log.segments.push_back({10, 0, 1000, 0, 100});
  EXPECT_EQ(summarize(log).size(), 1u);
  EXPECT_TRUE(summarize(EventLog{}).empty());
}

TEST(Correlation, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(correlation_e(counts(100, 0, 0, 100)).e_value, 1.0);
  EXPECT_DOUBLE_EQ(correlation_e(counts(100, 0, 0, 100)).sigma, 0.0);
  EXPECT_DOUBLE_EQ(correlation_e(counts(50, 50, 50, 50)).e_value, 0.0);
  const auto e = correlation_e(counts(90, 10, 10, 90));
  EXPECT_DOUBLE_EQ(e.e_value, 0.8);
  EXPECT_NEAR(e.sigma, 0.042, 5e-4);
  EXPECT_THROW(correlation_e(counts(0, 0, 0, 0)), DataError);
}

TEST(Correlation, PoissonSigmaAgreesWithBootstrap) {
  for (auto c : {counts(90, 10, 10, 90), counts(400, 120, 80, 350), counts(30, 25, 40, 20)}) {
    const double closed = correlation_e(c).sigma;
    EXPECT_NEAR(bootstrap_e_sigma(c, 20000, 7), closed, 0.05 * closed);
  }
}

TEST(Correlation, AntisymmetricUnderPortSwap) {
  gen::Source src(41);
  for (int i = 0; i < 100; ++i) {
    const auto c = counts(src.integer(0, 500), src.integer(0, 500), src.integer(0, 500),
                          src.integer(1, 500));
    const auto swapped = counts(c.c_tr, c.c_tt, c.c_rr, c.c_rt);
    EXPECT_NEAR(correlation_e(c).e_value, -correlation_e(swapped).e_value, 1e-15);
    EXPECT_NEAR(correlation_e(c).sigma, correlation_e(swapped).sigma, 1e-15);
    EXPECT_LE(std::abs(correlation_e(c).e_value), 1.0);
  }
}

TEST(Chsh, IdealPatternAndZero) {
  const double r = std::numbers::sqrt2 / 2;
  const auto s = chsh_s({r, 0.01}, {r, 0.01}, {r, 0.01}, {-r, 0.01});
  EXPECT_NEAR(s.s_value, 2 * std::numbers::sqrt2, 1e-12);
  EXPECT_NEAR(s.sigma, 0.02, 1e-15);
  EXPECT_DOUBLE_EQ(chsh_s({}, {}, {}, {}).s_value, 0.0);
}

TEST(Chsh, BornOracleCorrelationsGiveMaximalViolation) {
  const double eta = 0.86 * std::numbers::pi / 4;
  const auto st = ideal_state({eta}, 0.0, 0.5);
  const AnalyzerSettings a;
  const auto e = [&](double t1, double t2) { return CorrelationEstimate{born_e(st, t1, t2), 0}; };
  const auto s = chsh_s(e(a.theta1, a.theta2), e(a.theta1p, a.theta2), e(a.theta1, a.theta2p),
                        e(a.theta1p, a.theta2p));
  EXPECT_NEAR(s.s_value, 2.79, 0.005);
  EXPECT_NEAR(s.s_value, chsh_max_canonical({eta}), 1e-12);
}

TEST(Chsh, MissingSettingIsDataError) {
  EXPECT_THROW(chsh_from_summaries(summarize(build_log(10, {})), {}, 100), DataError);
}

TEST(PairStatistics, ConstructedLogReproducesRates) {
  // p1 = 1e-4, pc = 0.06, p2 = 1e-3 over 1e7 trials: g12 = 60.
  const std::uint64_t n = 10'000'000;
  std::vector<std::pair<std::uint64_t, Detector>> clicks;
  for (std::uint64_t k = 0; k < 1000; ++k) clicks.push_back({k, k % 2 ? Detector::R1 : Detector::T1});
  for (std::uint64_t k = 0; k < 60; ++k) clicks.push_back({k, k % 2 ? Detector::R2 : Detector::T2});
  for (std::uint64_t k = 0; k < 10000 - 60; ++k) clicks.push_back({2000 + k, Detector::T2});
  const auto est = estimate_g12(build_log(n, clicks));
  ASSERT_EQ(est.size(), 1u);
  const PairEstimate& p = est[0];
  EXPECT_DOUBLE_EQ(p.p1, 1e-4);
  EXPECT_DOUBLE_EQ(p.p2, 1e-3);
  EXPECT_DOUBLE_EQ(p.p12, 6e-6);
  EXPECT_NEAR(p.g12, 60.0, 1e-9);
  EXPECT_NEAR(p.p_c, 0.06, 1e-12);
  EXPECT_NEAR(p.sigma_p_c, std::sqrt(0.06 * 0.94 / 1000), 1e-12);
  // Poisson-dominated: sigma_g / g is close to 1/sqrt(n12).
  EXPECT_NEAR(p.sigma_g12 / p.g12, 1 / std::sqrt(60.0), 0.02);
  EXPECT_TRUE(p.nonclassical());
}

TEST(PairStatistics, NonclassicalThreshold) {
  PairEstimate p;
  p.g12_bar = 2.0;
  EXPECT_FALSE(p.nonclassical());
  p.g12_bar = 2.0001;
  EXPECT_TRUE(p.nonclassical());
}

TEST(PairStatistics, UndefinedWithoutField2) {
  EXPECT_THROW(estimate_g12(build_log(100, {{1, Detector::T1}})), DataError);
  EXPECT_THROW(estimate_g12(build_log(100, {{1, Detector::T2}})), DataError);
}

TEST(PairStatistics, VisibilityRelation) {
  EXPECT_NEAR(visibility_from_g12(57), 56.0 / 58.0, 1e-15);
  EXPECT_NEAR(s_from_g12(2.74, 57), 2.74 * 56 / 58, 1e-12);
  EXPECT_NEAR(g12_at_bell_threshold(2.74), 6.4, 0.05);
  EXPECT_NEAR(s_from_g12(2.74, g12_at_bell_threshold(2.74)), 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(s_from_g12(2.74, 1.0), 0.0);
}

TEST(NullModels, ShuffledTrialsAreUncorrelated) {
  ExperimentConfig c;
  c.analyzer.mode = AnalyzerMode::Fixed;
  c.windows = 40;
  c.optics.p_excitation = 0.02;
  c.optics.eta1 = 0.5;
  c.optics.eta2_base = 0.5;
  const EventLog log = simulate_run(c, 12);
  const auto before = estimate_g12(log)[0];
  EXPECT_GT(before.g12, 10.0);
  for (std::uint64_t seed : {1, 2, 3}) {
    const EventLog shuffled = shuffle_field2_trials(log, seed);
    const auto after = estimate_g12(shuffled)[0];
    EXPECT_NEAR(after.g12, 1.0, 3 * after.sigma_g12) << seed;
    EXPECT_EQ(after.n_trials, before.n_trials);
    EXPECT_EQ(shuffled.events.size(), log.events.size());
    EXPECT_DOUBLE_EQ(after.p1, before.p1);
  }
}

TEST(Fringe, BornOracleVisibilities) {
  const double eta = 0.86 * std::numbers::pi / 4;
  const auto st = ideal_state({eta}, 0.0, 0.5);
  for (auto [t1, expected] : {std::pair{0.0, 1.0}, std::pair{-45.0, std::sin(2 * eta)}}) {
    std::vector<FringePoint> pts;
    for (int i = 0; i < 8; ++i) pts.push_back({22.5 * i, {born_e(st, t1, 22.5 * i), 0.0}});
    const auto fit = fringe_visibility(pts);
    EXPECT_NEAR(fit.visibility, expected, 1e-9) << t1;
  }
}

TEST(Fringe, DegenerateInputsRejected) {
  std::vector<FringePoint> three{{0, {1, 0}}, {45, {0, 0}}, {90, {-1, 0}}};
  EXPECT_THROW(fringe_visibility(three), DataError);
  std::vector<FringePoint> narrow{{0, {1, 0}}, {10, {0.9, 0}}, {20, {0.8, 0}}, {30, {0.5, 0}}};
  EXPECT_THROW(fringe_visibility(narrow), DataError);
}

TEST(Simulated, CorrelationsMatchBornProbabilities) {
  ExperimentConfig c;
  c.windows = 25;
  c.optics.p_excitation = 0.05;
  c.optics.eta1 = 0.5;
  c.optics.eta2_base = 0.5;
  c.optics.bg2 = 0.0;
  c.optics.pair_statistics = PairStatistics::Single;
  const EventLog log = simulate_run(c, 21);
  const auto st = ideal_state(c.mixing_angle(), c.phase_rad, 0.5);
  const auto groups = summarize(log);
  ASSERT_EQ(groups.size(), 5u);
  for (const auto& g : groups) {
    const auto e = correlation_e(g.coincidences);
    EXPECT_NEAR(e.e_value, born_e(st, g.key.theta1_deg(), g.key.theta2_deg()), 3 * e.sigma)
        << g.key.theta1_deg() << "," << g.key.theta2_deg();
  }
  const auto s = chsh_from_summaries(groups, c.analyzer.chsh, log.segments[0].tau_ns);
  EXPECT_NEAR(s.s_value, chsh_max_canonical(c.mixing_angle()), 3 * s.sigma);
}
