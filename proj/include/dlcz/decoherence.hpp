#pragma once

#include "dlcz/core_model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace dlcz {

/// Ground (F=4) and storage (F=3) Lande factors of the Cs D2 scheme.
struct LandeFactors {
  double ground = 0.25;
  double storage = -0.25;
};

/// Raw inputs behind K: ensemble length and residual field gradient.
struct FieldGradient {
  double length_m = 0.0;
  double gradient_tesla_per_m = 0.0;
};

/// Storage-time dephasing parameters.
///
/// K is the spread of ground-state Zeeman shifts across the ensemble,
/// K = mu_B * g_Fg * L * b / h, in kHz. xi scales the modeled joint
/// probability onto measured data (one per polarization configuration).
struct DecoherenceParams {
  double k_khz = 12.0;
  double xi = 1.0;
  LandeFactors lande;
  std::optional<FieldGradient> raw;

  /// Derives K from (L, b). Throws std::invalid_argument on negative input.
  static DecoherenceParams from_field_gradient(FieldGradient raw, LandeFactors lande = {},
                                               double xi = 1.0);

  /// Checks K >= 0, xi > 0 and the (L, b) -> K consistency.
  void validate() const;
};

/// K in kHz implied by a field gradient, using CODATA mu_B / h.
double zeeman_spread_khz(FieldGradient raw, LandeFactors lande);

struct CoherenceEntry {
  double weight = 0.0;
  double freq_multiplier = 0.0;
  int m_ground = 0;
  int m_storage = 0;
};

/// One entry per stored ground-storage coherence. The multiplier is
/// |m_g g_g - m_s g_s| / |g_g|, the differential Zeeman shift in units of K.
struct CoherenceTable {
  std::vector<CoherenceEntry> entries;
};

CoherenceTable coherence_table(const BranchingTable& branching, LandeFactors lande = {});

/// sin(x)/x with the removable singularity filled in.
double sinc(double x);

/// d(tau) = |sum_i w_i sinc(pi K m_i tau)|: detunings uniformly spread across
/// the ensemble length.
double dephasing_factor(double tau_us, const DecoherenceParams& params,
                        const CoherenceTable& table);

/// Evaluates d over a grid of storage times (OpenMP-parallel).
std::vector<double> dephasing_curve(std::span<const double> tau_us, const DecoherenceParams& params,
                                    const CoherenceTable& table);

/// base * d(tau)^2.
double retrieval_efficiency(double tau_us, const DecoherenceParams& params,
                            const CoherenceTable& table, double base);

/// xi * base_p12 * d(tau)^2.
double p12_theory(double tau_us, const DecoherenceParams& params, const CoherenceTable& table,
                  double base_p12);

/// Cross-correlation decay for one polarization configuration:
/// g12(tau) = 1 + p12_theory(tau, params, table, base_excess). The constant 1
/// is the accidental-coincidence floor reached once the stored coherence is
/// gone.
double g12_decay_model(double tau_us, const DecoherenceParams& params, const CoherenceTable& table,
                       double base_excess);

/// Coherence table of the Cs write scheme (F=4 -> F'=4 -> F=3).
const CoherenceTable& cesium_coherence_table();

}  // namespace dlcz
