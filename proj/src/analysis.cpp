#include "dlcz/analysis.hpp"

#include "dlcz/errors.hpp"
#include "dlcz/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace dlcz {
namespace {

GroupKey key_of(const Segment& s) { return {s.theta1_mdeg, s.theta2_mdeg, s.tau_ns}; }
GroupKey key_of(const DetectionEvent& e) { return {e.theta1_mdeg, e.theta2_mdeg, e.tau_ns}; }

struct TrialClicks {
  std::array<std::int64_t, 4> first_time{};
  ClickMask mask = 0;
};

// Reduces one trial's clicks into its group.
void account(GroupSummary& g, const TrialClicks& t, std::int64_t tau_ns, CoincidenceWindow window) {
  for (int d = 0; d < 4; ++d) {
    if (t.mask & (1u << d)) ++g.singles[d];
  }
  const bool f1 = t.mask & kField1Mask;
  const bool f2 = t.mask & kField2Mask;
  if (f1) ++g.n_field1;
  if (f2) ++g.n_field2;
  if (!f1 || !f2) return;

  const auto coincident = [&](Detector a, Detector b) {
    if (!(t.mask & bit(a)) || !(t.mask & bit(b))) return false;
    if (!window) return true;
    const std::int64_t dt = t.first_time[static_cast<int>(b)] - t.first_time[static_cast<int>(a)];
    return dt >= tau_ns && dt <= tau_ns + *window;
  };
  const bool tt = coincident(Detector::T1, Detector::T2);
  const bool tr = coincident(Detector::T1, Detector::R2);
  const bool rt = coincident(Detector::R1, Detector::T2);
  const bool rr = coincident(Detector::R1, Detector::R2);
  g.coincidences.c_tt += tt;
  g.coincidences.c_tr += tr;
  g.coincidences.c_rt += rt;
  g.coincidences.c_rr += rr;
  if (tt || tr || rt || rr) ++g.n_both;
}

// Standard deviation of g = N n11 / (n1 n2) by the multinomial delta method
// over the four trial cells (both, field-1 only, field-2 only, neither).
double g_sigma(double n, double n11, double n1, double n2) {
  if (n1 <= 0 || n2 <= 0) return 0.0;
  const double g = n * n11 / (n1 * n2);
  if (n11 <= 0) return n / (n1 * n2);
  const double n10 = n1 - n11;
  const double n01 = n2 - n11;
  const double n00 = n - n1 - n2 + n11;
  // Gradient of log g; its count-weighted sum vanishes.
  const double g11 = 1 / n + 1 / n11 - 1 / n1 - 1 / n2;
  const double g10 = 1 / n - 1 / n1;
  const double g01 = 1 / n - 1 / n2;
  const double g00 = 1 / n;
  const double mean = g11 * n11 + g10 * n10 + g01 * n01 + g00 * n00;
  const double var = g11 * g11 * n11 + g10 * g10 * n10 + g01 * g01 * n01 + g00 * g00 * n00 -
                     mean * mean / n;
  return g * std::sqrt(std::max(var, 0.0));
}

double binomial_sigma(double p, double n) { return n > 0 ? std::sqrt(p * (1 - p) / n) : 0.0; }

}  // namespace

std::vector<GroupSummary> summarize(const EventLog& log, CoincidenceWindow window) {
  if (window && *window <= 0) {
    throw DataError(fmt::format("coincidence window must be positive, got {} ns", *window));
  }

  std::map<GroupKey, GroupSummary> groups;
  for (const Segment& s : log.segments) {
    GroupSummary& g = groups[key_of(s)];
    g.key = key_of(s);
    g.coincidences.key = g.key;
    g.n_trials += s.trial_count;
  }
  const auto segment_of = [&](std::uint64_t trial) -> const Segment* {
    auto it = std::upper_bound(log.segments.begin(), log.segments.end(), trial,
                               [](std::uint64_t t, const Segment& s) { return t < s.first_trial; });
    if (it == log.segments.begin()) return nullptr;
    --it;
    return trial < it->first_trial + it->trial_count ? &*it : nullptr;
  };

  std::int64_t last_time = std::numeric_limits<std::int64_t>::min();
  std::size_t i = 0;
  const auto& ev = log.events;
  while (i < ev.size()) {
    const std::uint64_t trial = ev[i].trial_index;
    const GroupKey key = key_of(ev[i]);
    TrialClicks clicks;
    for (; i < ev.size() && ev[i].trial_index == trial; ++i) {
      const DetectionEvent& e = ev[i];
      if (e.time_ns < last_time) {
        throw DataError(fmt::format("events not sorted by time at record {}", i + 1));
      }
      last_time = e.time_ns;
      if (key_of(e) != key) {
        throw DataError(fmt::format("trial {} mixes analyzer settings", trial));
      }
      const int d = static_cast<int>(e.detector);
      if (!(clicks.mask & (1u << d))) {
        clicks.mask |= ClickMask(1u << d);
        clicks.first_time[d] = e.time_ns;
      }
    }
    const Segment* seg = segment_of(trial);
    if (seg == nullptr || key_of(*seg) != key) {
      throw DataError(fmt::format("trial {} lies outside the declared segments", trial));
    }
    account(groups[key], clicks, key.tau_ns, window);
  }

  std::vector<GroupSummary> out;
  for (auto& [key, g] : groups) {
    if (g.n_trials == 0) continue;
    g.coincidences.n_trials = g.n_trials;
    out.push_back(g);
  }
  return out;
}

std::vector<CoincidenceCounts> count_coincidences(const EventLog& log, CoincidenceWindow window) {
  std::vector<CoincidenceCounts> out;
  for (const auto& g : summarize(log, window)) out.push_back(g.coincidences);
  return out;
}

CorrelationEstimate correlation_e(const CoincidenceCounts& c) {
  const double n = static_cast<double>(c.total());
  if (n == 0) {
    throw DataError(fmt::format("no coincidences at theta1 = {} deg, theta2 = {} deg",
                                c.key.theta1_deg(), c.key.theta2_deg()));
  }
  const double plus = static_cast<double>(c.c_tt + c.c_rr);
  const double minus = static_cast<double>(c.c_tr + c.c_rt);
  return {(plus - minus) / n, 2.0 * std::sqrt(plus * minus * n) / (n * n)};
}

double bootstrap_e_sigma(const CoincidenceCounts& counts, int resamples, std::uint64_t seed) {
  if (resamples < 2) throw ConfigError("bootstrap needs at least two resamples");
  const std::array<double, 4> mean{double(counts.c_tt), double(counts.c_tr), double(counts.c_rt),
                                   double(counts.c_rr)};
  double sum = 0, sum2 = 0;
  int used = 0;
  for (int r = 0; r < resamples; ++r) {
    SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(r));
    std::array<double, 4> c{};
    for (int k = 0; k < 4; ++k) {
      if (mean[k] > 0) c[k] = static_cast<double>(std::poisson_distribution<long>(mean[k])(rng));
    }
    const double n = c[0] + c[1] + c[2] + c[3];
    if (n == 0) continue;
    const double e = (c[0] + c[3] - c[1] - c[2]) / n;
    sum += e;
    sum2 += e * e;
    ++used;
  }
  if (used < 2) throw DataError("bootstrap produced no usable resamples");
  const double m = sum / used;
  return std::sqrt(std::max(0.0, (sum2 - used * m * m) / (used - 1)));
}

BellEstimate chsh_s(const CorrelationEstimate& e1, const CorrelationEstimate& e2,
                    const CorrelationEstimate& e3, const CorrelationEstimate& e4) {
  BellEstimate b;
  b.e = {e1, e2, e3, e4};
  b.s_signed = e1.e_value + e2.e_value + e3.e_value - e4.e_value;
  b.s_value = std::abs(b.s_signed);
  b.sigma = std::sqrt(e1.sigma * e1.sigma + e2.sigma * e2.sigma + e3.sigma * e3.sigma +
                      e4.sigma * e4.sigma);
  return b;
}

BellEstimate chsh_from_summaries(const std::vector<GroupSummary>& groups,
                                 const AnalyzerSettings& settings, std::int64_t tau_ns) {
  const auto find = [&](double t1, double t2) {
    const GroupKey key{to_mdeg(t1), to_mdeg(t2), tau_ns};
    for (const auto& g : groups) {
      if (g.key == key) return correlation_e(g.coincidences);
    }
    throw DataError(fmt::format("no data at theta1 = {} deg, theta2 = {} deg, tau = {} ns", t1, t2,
                                tau_ns));
  };
  return chsh_s(find(settings.theta1, settings.theta2), find(settings.theta1p, settings.theta2),
                find(settings.theta1, settings.theta2p), find(settings.theta1p, settings.theta2p));
}

PairEstimate estimate_g12(const GroupSummary& g) {
  if (g.n_field1 == 0) throw DataError("g12 undefined: no field-1 clicks");
  if (g.n_field2 == 0) throw DataError("g12 undefined: no field-2 clicks");

  PairEstimate p;
  p.key = g.key;
  p.n_trials = g.n_trials;
  const double n = static_cast<double>(g.n_trials);
  const double n1 = static_cast<double>(g.n_field1);
  const double n2 = static_cast<double>(g.n_field2);
  const double n12 = static_cast<double>(g.n_both);

  p.p1 = n1 / n;
  p.p2 = n2 / n;
  p.p12 = n12 / n;
  p.sigma_p1 = binomial_sigma(p.p1, n);
  p.sigma_p2 = binomial_sigma(p.p2, n);
  p.sigma_p12 = binomial_sigma(p.p12, n);
  p.g12 = n * n12 / (n1 * n2);
  p.sigma_g12 = g_sigma(n, n12, n1, n2);
  p.p_c = n12 / n1;
  p.sigma_p_c = binomial_sigma(p.p_c, n1);

  const auto& s = g.singles;
  const auto channel = [&](Detector a, Detector b, std::uint64_t joint, double& value,
                           double& sigma) {
    const double na = static_cast<double>(s[static_cast<int>(a)]);
    const double nb = static_cast<double>(s[static_cast<int>(b)]);
    if (na == 0 || nb == 0) {
      value = sigma = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    value = n * static_cast<double>(joint) / (na * nb);
    sigma = g_sigma(n, static_cast<double>(joint), na, nb);
  };
  channel(Detector::T1, Detector::T2, g.coincidences.c_tt, p.g12_a, p.sigma_g12_a);
  channel(Detector::R1, Detector::R2, g.coincidences.c_rr, p.g12_b, p.sigma_g12_b);
  p.g12_bar = 0.5 * (p.g12_a + p.g12_b);
  p.sigma_g12_bar = 0.5 * std::hypot(p.sigma_g12_a, p.sigma_g12_b);
  p.visibility_model = visibility_from_g12(p.g12_bar);
  return p;
}

std::vector<PairEstimate> estimate_g12(const EventLog& log, CoincidenceWindow window) {
  std::vector<PairEstimate> out;
  for (const auto& g : summarize(log, window)) out.push_back(estimate_g12(g));
  return out;
}

double visibility_from_g12(double g12) { return (g12 - 1.0) / (g12 + 1.0); }

double s_from_g12(double smax, double g12) { return smax * visibility_from_g12(g12); }

double g12_at_bell_threshold(double smax) {
  if (smax <= 2.0) throw ConfigError(fmt::format("Smax = {} never exceeds 2", smax));
  return (smax + 2.0) / (smax - 2.0);
}

EventLog shuffle_field2_trials(const EventLog& log, std::uint64_t seed) {
  EventLog out = log;
  out.events.clear();
  SplitMix64 rng = substream(seed, 0);
  std::vector<DetectionEvent> moved;
  for (const DetectionEvent& e : log.events) {
    if (is_field1(e.detector)) {
      out.events.push_back(e);
      continue;
    }
    auto it = std::upper_bound(log.segments.begin(), log.segments.end(), e.trial_index,
                               [](std::uint64_t t, const Segment& s) { return t < s.first_trial; });
    if (it == log.segments.begin()) throw DataError("field-2 event before the first segment");
    --it;
    DetectionEvent m = e;
    m.trial_index = it->first_trial + static_cast<std::uint64_t>(uniform01(rng) * it->trial_count);
    moved.push_back(m);
  }
  out.events.insert(out.events.end(), moved.begin(), moved.end());

  // Times no longer correspond to the schedule; re-stamp by trial so the log
  // stays sorted and field-1 precedes field-2 within a trial.
  std::stable_sort(out.events.begin(), out.events.end(), [](const auto& a, const auto& b) {
    if (a.trial_index != b.trial_index) return a.trial_index < b.trial_index;
    return is_field1(a.detector) && !is_field1(b.detector);
  });
  constexpr std::int64_t kSlot = 1'000'000;
  for (auto& e : out.events) {
    const std::int64_t base = static_cast<std::int64_t>(e.trial_index) * kSlot;
    e.time_ns = base + (is_field1(e.detector) ? 0 : e.tau_ns);
  }
  return out;
}

}  // namespace dlcz
