#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <vector>

namespace dlcz {

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> for integer angular momenta
/// (Racah formula, Condon-Shortley phase). Returns 0 for forbidden couplings.
double clebsch_gordan(int j1, int m1, int j2, int m2, int J, int M);

/// Population weights of the storage level after sigma+ write excitation from
/// a uniformly populated ground manifold.
///
/// Entry m describes atoms starting in |g, m>, excited to |e, m+1>:
///   p_plus  -- decay by sigma+ emission, ending in |s, m>
///   p_minus -- decay by sigma- emission, ending in |s, m+2>
struct BranchingEntry {
  int m_ground = 0;
  double p_plus = 0.0;
  double p_minus = 0.0;
};

struct BranchingTable {
  std::vector<BranchingEntry> entries;
  int fg = 4;
  int fe = 4;
  int fs = 3;

  double total_plus() const;
  double total_minus() const;
};

struct MixingAngle {
  double radians = 0.0;
};

/// Builds the branching table for the F=fg -> F'=fe -> F=fs Raman scheme.
/// Weights are |CG(excitation)|^2 * |CG(decay)|^2, normalized to unit sum.
/// Throws std::invalid_argument if either step is not a dipole transition.
BranchingTable cg_branching_weights(int fg = 4, int fe = 4, int fs = 3);

/// Relative strength |CG|^2 of the decay |e, m_e> -> |s, m_e - q> emitting a
/// photon of helicity q (q = +1 for sigma+, -1 for sigma-).
double decay_strength(int fe, int fs, int m_e, int q);

/// cos^2(eta) = sum p_plus / sum (p_plus + p_minus).
MixingAngle effective_eta(const BranchingTable& table);

/// Ordered basis {H1H2, H1V2, V1H2, V1V2}; index = 2*pol1 + pol2 with H=0, V=1.
using DensityMatrix = Eigen::Matrix4cd;

/// Polarization state of the (field 1, field 2) photon pair, conditioned on a
/// pair being present. pair_probability carries the weight of the non-vacuum
/// part.
class TwoQubitState {
 public:
  /// Throws std::invalid_argument unless rho is a valid density matrix.
  TwoQubitState(const DensityMatrix& rho, double pair_probability);

  const DensityMatrix& rho() const { return rho_; }
  double pair_probability() const { return pair_probability_; }

 private:
  DensityMatrix rho_;
  double pair_probability_;
};

struct StateCheck {
  double hermiticity_error = 0.0;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
  bool valid = false;
};

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kEigenFloor = -1e-10;

StateCheck check_density_matrix(const DensityMatrix& rho);

/// cos(eta)|H1 V2> + e^{i phase} sin(eta)|V1 H2>.
TwoQubitState ideal_state(MixingAngle eta, double phase, double p);

/// Scales the H1V2 <-> V1H2 coherence by d in [0, 1].
TwoQubitState apply_dephasing(const TwoQubitState& state, double d);

/// Wootters concurrence.
double concurrence(const TwoQubitState& state);

/// Joint probabilities for the polarizer-port pairs. Field 1's transmitted
/// port projects onto linear polarization at theta1; field 2's transmitted port
/// projects onto theta2 + 90 deg (the retrieved photon is orthogonally
/// polarized to the herald).
struct CoincidenceProbs {
  double tt = 0.0;
  double tr = 0.0;
  double rt = 0.0;
  double rr = 0.0;

  double sum() const { return tt + tr + rt + rr; }
  double correlation() const { return (tt + rr - tr - rt) / sum(); }
};

struct AnalyzerSettings {
  double theta1 = -22.5;
  double theta1p = 22.5;
  double theta2 = 0.0;
  double theta2p = 45.0;

  static AnalyzerSettings canonical() { return {}; }
};

/// Real unit vector (H, V components) for a linear polarizer at angle_deg.
Eigen::Vector2d polarizer_axis(double angle_deg);

/// Projection axis of each port: index 0 = transmitted, 1 = reflected.
std::array<Eigen::Vector2d, 2> field1_ports(double theta1_deg);
std::array<Eigen::Vector2d, 2> field2_ports(double theta2_deg);

CoincidenceProbs born_coincidence_probs(const TwoQubitState& state, double theta1_deg,
                                        double theta2_deg);

/// S = E(t1,t2) + E(t1',t2) + E(t1,t2') - E(t1',t2') on Born probabilities.
double chsh_from_state(const TwoQubitState& state, const AnalyzerSettings& settings);

/// |S| at the canonical settings for the dephasing-free ideal state:
/// sqrt(2) * (1 + sin 2 eta).
double chsh_max_canonical(MixingAngle eta);

}  // namespace dlcz
