#pragma once

// Independent reference computations used only by tests. None of these call
// into the library's own implementation of the same quantity.

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

/// |<j1 m1; j2 m2 | J M>|^2 by diagonalizing J^2 in the fixed-M subspace of
/// the product basis. Integer j only.
double cg_squared(int j1, int m1, int j2, int m2, int J, int M);

/// Sum over the ground manifold of |CG(exc)|^2 |CG(decay)|^2 split by decay
/// helicity, for sigma+ excitation F=fg -> F'=fe and decay to F=fs.
struct BranchingSums {
  double plus = 0.0;
  double minus = 0.0;
};
BranchingSums branching_sums(int fg, int fe, int fs);

/// Joint port probabilities (TT, TR, RT, RR) for
/// cos(eta)|H1 V2> + e^{i phase} sin(eta)|V1 H2>, with field-1 T along theta1
/// and field-2 T along theta2 + 90 deg, from explicit two-photon amplitudes.
std::array<double, 4> born_pure(double eta, double phase, double theta1_deg, double theta2_deg);

/// Same for the state with its coherence scaled by d (a mixture of the pure
/// state and its fully dephased version).
std::array<double, 4> born_dephased(double eta, double phase, double d, double theta1_deg,
                                    double theta2_deg);

/// Monte Carlo average of |sum_i w_i <exp(i 2 pi K m_i x tau)>| over n
/// detunings x uniform in [-1/2, 1/2].
double dephasing_mc(double k_khz, double tau_us, const std::vector<std::array<double, 2>>& w_m,
                    int n, std::uint64_t seed);

/// Same average on a midpoint grid of n detunings (deterministic quadrature).
double dephasing_grid(double k_khz, double tau_us, const std::vector<std::array<double, 2>>& w_m,
                      int n);

/// Upper tail of the chi-square distribution.
double chi2_survival(double x, int dof);

/// Pearson chi-square of observed counts against expected probabilities;
/// cells with zero expectation must have zero counts.
double pearson_chi2(const std::array<std::uint64_t, 4>& observed, const std::array<double, 4>& p,
                    int& dof);

}  // namespace oracle
