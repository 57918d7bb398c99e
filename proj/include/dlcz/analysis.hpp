#pragma once

#include "dlcz/core_model.hpp"
#include "dlcz/decoherence.hpp"
#include "dlcz/simulator.hpp"

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

namespace dlcz {

/// Analyzer setting and storage time shared by a group of trials.
struct GroupKey {
  std::int32_t theta1_mdeg = 0;
  std::int32_t theta2_mdeg = 0;
  std::int64_t tau_ns = 0;

  double theta1_deg() const { return theta1_mdeg / 1000.0; }
  double theta2_deg() const { return theta2_mdeg / 1000.0; }
  double tau_us() const { return static_cast<double>(tau_ns) * 1e-3; }

  auto operator<=>(const GroupKey&) const = default;
};

struct CoincidenceCounts {
  GroupKey key;
  std::uint64_t c_tt = 0;
  std::uint64_t c_tr = 0;
  std::uint64_t c_rt = 0;
  std::uint64_t c_rr = 0;
  std::uint64_t n_trials = 0;

  std::uint64_t total() const { return c_tt + c_tr + c_rt + c_rr; }
};

/// Everything the estimators need from one group, without the events.
struct GroupSummary {
  GroupKey key;
  std::uint64_t n_trials = 0;
  std::array<std::uint64_t, 4> singles{};  // trials with a click, indexed by Detector
  std::uint64_t n_field1 = 0;              // trials with any field-1 click
  std::uint64_t n_field2 = 0;              // trials with any field-2 click
  std::uint64_t n_both = 0;                // trials with a field-1/field-2 coincidence
  CoincidenceCounts coincidences;
};

/// Coincidence window: a field-2 click counts against a field-1 click of the
/// same trial when their delay lies in [tau, tau + width]. Unset means the
/// whole trial read gate.
using CoincidenceWindow = std::optional<std::int64_t>;

/// Groups the log by (theta1, theta2, tau) and reduces it to counts. Groups
/// with no trials are omitted. Throws DataError on unsorted events, a
/// non-positive window, or events outside the declared trial ranges.
std::vector<GroupSummary> summarize(const EventLog& log, CoincidenceWindow window = {});

std::vector<CoincidenceCounts> count_coincidences(const EventLog& log,
                                                  CoincidenceWindow window = {});

struct CorrelationEstimate {
  double e_value = 0.0;
  double sigma = 0.0;
};

/// E = (TT + RR - TR - RT) / (TT + RR + TR + RT) with independent-Poisson
/// errors, sigma_E = 2 sqrt(N+ N- (N+ + N-)) / N^2. Throws DataError when no
/// coincidences were recorded.
CorrelationEstimate correlation_e(const CoincidenceCounts& counts);

/// Parametric bootstrap of sigma_E: each count is redrawn from a Poisson
/// distribution with its observed mean.
double bootstrap_e_sigma(const CoincidenceCounts& counts, int resamples, std::uint64_t seed);

struct BellEstimate {
  double s_value = 0.0;   // |S|
  double s_signed = 0.0;  // E1 + E2 + E3 - E4
  double sigma = 0.0;
  std::array<CorrelationEstimate, 4> e{};
  std::optional<double> smax_model;

  /// Standard deviations above the local-realist bound |S| = 2.
  double violation_sigmas() const { return sigma > 0.0 ? (s_value - 2.0) / sigma : 0.0; }
};

/// S = E(t1,t2) + E(t1',t2) + E(t1,t2') - E(t1',t2').
BellEstimate chsh_s(const CorrelationEstimate& e1, const CorrelationEstimate& e2,
                    const CorrelationEstimate& e3, const CorrelationEstimate& e4);

/// Finds the four CHSH groups at `tau_ns` and combines them. Throws DataError
/// if any setting is missing.
BellEstimate chsh_from_summaries(const std::vector<GroupSummary>& groups,
                                 const AnalyzerSettings& settings, std::int64_t tau_ns);

struct PairEstimate {
  GroupKey key;
  std::uint64_t n_trials = 0;
  double p1 = 0.0, sigma_p1 = 0.0;
  double p2 = 0.0, sigma_p2 = 0.0;
  double p12 = 0.0, sigma_p12 = 0.0;
  double g12 = 0.0, sigma_g12 = 0.0;  // field level, both ports summed
  double p_c = 0.0, sigma_p_c = 0.0;
  double visibility_model = 0.0;       // (g12 - 1) / (g12 + 1) on g12_bar

  /// Per polarization configuration: (T1, T2) and (R1, R2) channel pairs;
  /// NaN when either channel never clicked.
  double g12_a = 0.0, sigma_g12_a = 0.0;
  double g12_b = 0.0, sigma_g12_b = 0.0;
  double g12_bar = 0.0, sigma_g12_bar = 0.0;

  bool nonclassical() const { return g12_bar > kNonclassicalG12; }
  static constexpr double kNonclassicalG12 = 2.0;
};

/// Throws DataError if the group has no field-1 or no field-2 clicks.
PairEstimate estimate_g12(const GroupSummary& group);
std::vector<PairEstimate> estimate_g12(const EventLog& log, CoincidenceWindow window = {});

/// (g12 - 1) / (g12 + 1).
double visibility_from_g12(double g12);
/// Smax * visibility_from_g12(g12).
double s_from_g12(double smax, double g12);
/// g12 at which Smax * V(g12) = 2: (Smax + 2) / (Smax - 2).
double g12_at_bell_threshold(double smax);

/// Test-only null model: every field-2 event is moved to a uniformly random
/// trial of its own segment, destroying field-1/field-2 correlations.
EventLog shuffle_field2_trials(const EventLog& log, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fits

struct FringePoint {
  double theta2_deg = 0.0;
  CorrelationEstimate e;
};

struct VisibilityFit {
  double visibility = 0.0;
  double sigma = 0.0;
  double theta0_deg = 0.0;
};

/// Weighted least squares of E(theta2) = V cos(2 (theta2 - theta0)). Needs at
/// least four points spanning 90 deg; throws DataError otherwise or when the
/// normal equations are ill-conditioned.
VisibilityFit fringe_visibility(const std::vector<FringePoint>& points);

struct SmaxPoint {
  double g12 = 0.0;
  double s = 0.0;
  double sigma = 0.0;  // 0: unweighted
};

struct SmaxFit {
  double smax = 0.0;
  double sigma = 0.0;
  double residual_norm = 0.0;
  double threshold_g12 = 0.0;
};

/// One-parameter weighted least squares of S = Smax (g12 - 1)/(g12 + 1).
/// Throws DataError with fewer than three distinct g12 values.
SmaxFit fit_smax(const std::vector<SmaxPoint>& points);

struct DecayPoint {
  double tau_us = 0.0;
  double g12 = 0.0;
  double sigma = 0.0;  // 0: unweighted
};

/// g12(tau) of one polarization configuration, modeled as
/// 1 + xi * base_excess * d(tau; K)^2.
struct DecaySeries {
  std::vector<DecayPoint> points;
  double base_excess = 1.0;
};

struct DecayFitOptions {
  double initial_k_khz = 8.0;
  int max_function_evaluations = 400;
  LandeFactors lande;
};

struct DecayFit {
  double k_fit = 0.0;             // kHz, >= 0
  std::vector<double> xi_fit;     // one per series
  std::vector<double> base_excess;
  LandeFactors lande;
  Eigen::MatrixXd covariance;     // parameters (K, xi_0, xi_1, ...)
  double residual_norm = 0.0;     // sqrt(sum of squared weighted residuals)
  int function_evaluations = 0;

  /// (K, xi_i) block of the covariance.
  Eigen::Matrix2d covariance_for(std::size_t series) const;
  DecoherenceParams params_for(std::size_t series) const;
  double g12_model(std::size_t series, double tau_us) const;
};

/// Levenberg-Marquardt fit of a shared K and per-series xi. Each series needs
/// at least four points, one of them at tau <= 1 us. Throws DataError on bad
/// input and FitError (with the last iterate) when it does not converge or
/// the residual is not finite.
DecayFit fit_decay(const std::vector<DecaySeries>& series, const DecayFitOptions& options = {});

struct SDecayPoint {
  double tau_us = 0.0;
  double g12_bar = 0.0;
  double s = 0.0;
};

/// S(tau) = Smax V(g12_bar(tau)), g12_bar the mean of the modeled series.
std::vector<SDecayPoint> predict_s_decay(const DecayFit& fit, double smax,
                                         const std::vector<double>& tau_us);

}  // namespace dlcz
