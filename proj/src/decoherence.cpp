#include "dlcz/decoherence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dlcz {
namespace {

// CODATA 2018: Bohr magneton over Planck constant, Hz/T.
constexpr double kBohrOverPlanckHzPerTesla = 9.2740100783e-24 / 6.62607015e-34;

}  // namespace

double zeeman_spread_khz(FieldGradient raw, LandeFactors lande) {
  return kBohrOverPlanckHzPerTesla * std::abs(lande.ground) * raw.length_m *
         raw.gradient_tesla_per_m * 1e-3;
}

DecoherenceParams DecoherenceParams::from_field_gradient(FieldGradient raw, LandeFactors lande,
                                                         double xi) {
  if (raw.length_m < 0.0 || raw.gradient_tesla_per_m < 0.0) {
    throw std::invalid_argument("field gradient inputs must be non-negative");
  }
  DecoherenceParams p;
  p.k_khz = zeeman_spread_khz(raw, lande);
  p.xi = xi;
  p.lande = lande;
  p.raw = raw;
  return p;
}

void DecoherenceParams::validate() const {
  if (!(k_khz >= 0.0)) throw std::invalid_argument("K must be >= 0");
  if (!(xi > 0.0)) throw std::invalid_argument("xi must be > 0");
  if (lande.ground == 0.0) throw std::invalid_argument("ground Lande factor must be non-zero");
  if (raw) {
    const double derived = zeeman_spread_khz(*raw, lande);
    const double scale = std::max(std::abs(derived), std::abs(k_khz));
    if (scale > 0.0 && std::abs(derived - k_khz) > 1e-6 * scale) {
      throw std::invalid_argument("K does not match the field-gradient inputs");
    }
  }
}

CoherenceTable coherence_table(const BranchingTable& branching, LandeFactors lande) {
  CoherenceTable table;
  double total = 0.0;
  const auto add = [&](double w, int mg, int ms) {
    if (w <= 0.0) return;
    const double mult =
        std::abs(mg * lande.ground - ms * lande.storage) / std::abs(lande.ground);
    table.entries.push_back({w, mult, mg, ms});
    total += w;
  };
  for (const auto& e : branching.entries) {
    add(e.p_plus, e.m_ground, e.m_ground);
    add(e.p_minus, e.m_ground, e.m_ground + 2);
  }
  if (total > 0.0) {
    for (auto& e : table.entries) e.weight /= total;
  }
  return table;
}

double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double dephasing_factor(double tau_us, const DecoherenceParams& params,
                        const CoherenceTable& table) {
  if (tau_us < 0.0) throw std::invalid_argument("dephasing_factor: tau must be >= 0");
  // kHz * us = 1e-3
  const double phase_scale = std::numbers::pi * params.k_khz * tau_us * 1e-3;
  double sum = 0.0;
  for (const auto& e : table.entries) {
    sum += e.weight * sinc(phase_scale * e.freq_multiplier);
  }
  return std::min(1.0, std::abs(sum));
}

std::vector<double> dephasing_curve(std::span<const double> tau_us, const DecoherenceParams& params,
                                    const CoherenceTable& table) {
  std::vector<double> out(tau_us.size());
  const auto n = static_cast<long>(tau_us.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    out[i] = dephasing_factor(tau_us[i], params, table);
  }
  return out;
}

double retrieval_efficiency(double tau_us, const DecoherenceParams& params,
                            const CoherenceTable& table, double base) {
  if (!(base > 0.0 && base <= 1.0)) {
    throw std::invalid_argument("retrieval_efficiency: base must lie in (0,1]");
  }
  const double d = dephasing_factor(tau_us, params, table);
  return base * d * d;
}

double p12_theory(double tau_us, const DecoherenceParams& params, const CoherenceTable& table,
                  double base_p12) {
  const double d = dephasing_factor(tau_us, params, table);
  return params.xi * base_p12 * d * d;
}

double g12_decay_model(double tau_us, const DecoherenceParams& params, const CoherenceTable& table,
                       double base_excess) {
  return 1.0 + p12_theory(tau_us, params, table, base_excess);
}

const CoherenceTable& cesium_coherence_table() {
  static const CoherenceTable table = coherence_table(cg_branching_weights(4, 4, 3));
  return table;
}

}  // namespace dlcz
