#include "dlcz/core_model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dlcz {
namespace {

double factorial(int n) { return std::tgamma(static_cast<double>(n) + 1.0); }

bool dipole_allowed(int f_lower, int f_upper) {
  if (f_lower < 0 || f_upper < 0) return false;
  if (std::abs(f_lower - f_upper) > 1) return false;
  return !(f_lower == 0 && f_upper == 0);
}

}  // namespace

double clebsch_gordan(int j1, int m1, int j2, int m2, int J, int M) {
  if (m1 + m2 != M) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J) return 0.0;
  if (J < std::abs(j1 - j2) || J > j1 + j2) return 0.0;

  const double pre = std::sqrt((2.0 * J + 1.0) * factorial(J + j1 - j2) * factorial(J - j1 + j2) *
                               factorial(j1 + j2 - J) / factorial(j1 + j2 + J + 1)) *
                     std::sqrt(factorial(J + M) * factorial(J - M) * factorial(j1 - m1) *
                               factorial(j1 + m1) * factorial(j2 - m2) * factorial(j2 + m2));

  double sum = 0.0;
  for (int k = 0; k <= j1 + j2 - J; ++k) {
    const int a = j1 + j2 - J - k;
    const int b = j1 - m1 - k;
    const int c = j2 + m2 - k;
    const int d = J - j2 + m1 + k;
    const int e = J - j1 - m2 + k;
    if (a < 0 || b < 0 || c < 0 || d < 0 || e < 0) continue;
    const double term = 1.0 / (factorial(k) * factorial(a) * factorial(b) * factorial(c) *
                               factorial(d) * factorial(e));
    sum += (k % 2 == 0) ? term : -term;
  }
  return pre * sum;
}

double BranchingTable::total_plus() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.p_plus;
  return s;
}

double BranchingTable::total_minus() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.p_minus;
  return s;
}

double decay_strength(int fe, int fs, int m_e, int q) {
  // Emission of helicity q from |e, m_e> is the reverse of absorption
  // |s, m_e - q> + photon(q) -> |e, m_e>.
  const int m_s = m_e - q;
  if (std::abs(m_s) > fs || std::abs(m_e) > fe) return 0.0;
  const double cg = clebsch_gordan(fs, m_s, 1, q, fe, m_e);
  return cg * cg;
}

BranchingTable cg_branching_weights(int fg, int fe, int fs) {
  if (!dipole_allowed(fg, fe) || !dipole_allowed(fs, fe)) {
    throw std::invalid_argument("cg_branching_weights: no dipole transition for F=" +
                                std::to_string(fg) + " -> F'=" + std::to_string(fe) +
                                " -> F=" + std::to_string(fs));
  }

  BranchingTable table;
  table.fg = fg;
  table.fe = fe;
  table.fs = fs;

  double total = 0.0;
  for (int m = -fg; m <= fg; ++m) {
    BranchingEntry entry;
    entry.m_ground = m;
    const int m_e = m + 1;
    if (std::abs(m_e) <= fe) {
      const double cg_exc = clebsch_gordan(fg, m, 1, 1, fe, m_e);
      const double excitation = cg_exc * cg_exc;
      entry.p_plus = excitation * decay_strength(fe, fs, m_e, +1);
      entry.p_minus = excitation * decay_strength(fe, fs, m_e, -1);
    }
    total += entry.p_plus + entry.p_minus;
    table.entries.push_back(entry);
  }
  if (total <= 0.0) {
    throw std::invalid_argument("cg_branching_weights: no allowed Raman pathway");
  }
  for (auto& e : table.entries) {
    e.p_plus /= total;
    e.p_minus /= total;
  }
  return table;
}

MixingAngle effective_eta(const BranchingTable& table) {
  const double plus = table.total_plus();
  const double total = plus + table.total_minus();
  if (!(total > 0.0)) {
    throw std::invalid_argument("effective_eta: branching table has no weight");
  }
  const double c2 = std::clamp(plus / total, 0.0, 1.0);
  return MixingAngle{std::acos(std::sqrt(c2))};
}

StateCheck check_density_matrix(const DensityMatrix& rho) {
  StateCheck check;
  check.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  check.trace_error = std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
  const DensityMatrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(herm, Eigen::EigenvaluesOnly);
  check.min_eigenvalue = solver.eigenvalues().minCoeff();
  check.valid = check.hermiticity_error <= kHermitianTol && check.trace_error <= kTraceTol &&
                check.min_eigenvalue >= kEigenFloor;
  return check;
}

TwoQubitState::TwoQubitState(const DensityMatrix& rho, double pair_probability)
    : rho_(rho), pair_probability_(pair_probability) {
  const StateCheck check = check_density_matrix(rho);
  if (!check.valid) {
    throw std::invalid_argument("TwoQubitState: not a density matrix (herm err " +
                                std::to_string(check.hermiticity_error) + ", trace err " +
                                std::to_string(check.trace_error) + ", min eig " +
                                std::to_string(check.min_eigenvalue) + ")");
  }
  if (!(pair_probability >= 0.0 && pair_probability <= 1.0)) {
    throw std::invalid_argument("TwoQubitState: pair probability outside [0,1]");
  }
}

TwoQubitState ideal_state(MixingAngle eta, double phase, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("ideal_state: pair probability must lie in (0,1)");
  }
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi(1) = std::cos(eta.radians);
  psi(2) = std::polar(1.0, phase) * std::sin(eta.radians);
  DensityMatrix rho = psi * psi.adjoint();
  // Remove rounding asymmetry so the Hermiticity check is exact.
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return TwoQubitState(rho, p);
}

TwoQubitState apply_dephasing(const TwoQubitState& state, double d) {
  if (!(d >= 0.0 && d <= 1.0)) {
    throw std::invalid_argument("apply_dephasing: factor outside [0,1]");
  }
  DensityMatrix rho = state.rho();
  rho(1, 2) *= d;
  rho(2, 1) *= d;
  return TwoQubitState(rho, state.pair_probability());
}

double concurrence(const TwoQubitState& state) {
  const DensityMatrix& rho = state.rho();
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  // sigma_y (x) sigma_y in the {HH, HV, VH, VV} basis.
  yy(0, 3) = -1.0;
  yy(3, 0) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  const DensityMatrix tilde = yy * rho.conjugate() * yy;

  Eigen::SelfAdjointEigenSolver<DensityMatrix> root_solver(0.5 * (rho + rho.adjoint()));
  Eigen::Vector4d ev = root_solver.eigenvalues().cwiseMax(0.0);
  const DensityMatrix sqrt_rho = root_solver.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                                 root_solver.eigenvectors().adjoint();
  DensityMatrix r = sqrt_rho * tilde * sqrt_rho;
  r = 0.5 * (r + r.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(r, Eigen::EigenvaluesOnly);
  Eigen::Vector4d lambda = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(lambda.data(), lambda.data() + 4, std::greater<>());
  return std::max(0.0, lambda(0) - lambda(1) - lambda(2) - lambda(3));
}

Eigen::Vector2d polarizer_axis(double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  return {std::cos(a), std::sin(a)};
}

std::array<Eigen::Vector2d, 2> field1_ports(double theta1_deg) {
  return {polarizer_axis(theta1_deg), polarizer_axis(theta1_deg + 90.0)};
}

std::array<Eigen::Vector2d, 2> field2_ports(double theta2_deg) {
  return {polarizer_axis(theta2_deg + 90.0), polarizer_axis(theta2_deg)};
}

CoincidenceProbs born_coincidence_probs(const TwoQubitState& state, double theta1_deg,
                                        double theta2_deg) {
  const auto f1 = field1_ports(theta1_deg);
  const auto f2 = field2_ports(theta2_deg);
  double p[2][2];
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      Eigen::Vector4cd v;
      v << f1[a](0) * f2[b](0), f1[a](0) * f2[b](1), f1[a](1) * f2[b](0), f1[a](1) * f2[b](1);
      // Tr[rho |v><v|] = <v|rho|v>
      p[a][b] = std::real(v.dot(state.rho() * v));
    }
  }
  return {p[0][0], p[0][1], p[1][0], p[1][1]};
}

double chsh_from_state(const TwoQubitState& state, const AnalyzerSettings& s) {
  const auto e = [&](double t1, double t2) {
    return born_coincidence_probs(state, t1, t2).correlation();
  };
  return e(s.theta1, s.theta2) + e(s.theta1p, s.theta2) + e(s.theta1, s.theta2p) -
         e(s.theta1p, s.theta2p);
}

double chsh_max_canonical(MixingAngle eta) {
  return std::numbers::sqrt2 * (1.0 + std::sin(2.0 * eta.radians));
}

}  // namespace dlcz
