#include "dlcz/analysis.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace dlcz {
namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

double weight_of(double sigma) { return sigma > 0.0 ? 1.0 / (sigma * sigma) : 1.0; }

double sinc_derivative(double x) {
  if (std::abs(x) < 1e-4) return -x / 3.0;
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

// A(K) = sum_i w_i sinc(pi K m_i tau) and dA/dK; d^2 = A^2.
struct Amplitude {
  double value = 0.0;
  double dk = 0.0;
};

Amplitude amplitude(double k_khz, double tau_us, const CoherenceTable& table) {
  const double c = std::numbers::pi * tau_us * 1e-3;
  Amplitude a;
  for (const auto& e : table.entries) {
    const double x = c * e.freq_multiplier * k_khz;
    a.value += e.weight * sinc(x);
    a.dk += e.weight * sinc_derivative(x) * c * e.freq_multiplier;
  }
  return a;
}

struct DecayFunctor : Eigen::DenseFunctor<double> {
  struct Row {
    std::size_t series;
    double tau_us, g12, inv_sigma;
  };

  DecayFunctor(std::vector<Row> rows, std::vector<double> base, const CoherenceTable& table)
      : Eigen::DenseFunctor<double>(static_cast<int>(base.size()) + 1,
                                    static_cast<int>(rows.size())),
        rows_(std::move(rows)), base_(std::move(base)), table_(table) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const Row& r = rows_[i];
      const Amplitude a = amplitude(x[0], r.tau_us, table_);
      const double model = 1.0 + x[1 + r.series] * base_[r.series] * a.value * a.value;
      f[static_cast<Eigen::Index>(i)] = (model - r.g12) * r.inv_sigma;
    }
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    j.setZero();
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const Row& r = rows_[i];
      const auto row = static_cast<Eigen::Index>(i);
      const Amplitude a = amplitude(x[0], r.tau_us, table_);
      const double xb = x[1 + r.series] * base_[r.series];
      j(row, 0) = xb * 2.0 * a.value * a.dk * r.inv_sigma;
      j(row, static_cast<Eigen::Index>(1 + r.series)) =
          base_[r.series] * a.value * a.value * r.inv_sigma;
    }
    return 0;
  }

 private:
  std::vector<Row> rows_;
  std::vector<double> base_;
  const CoherenceTable& table_;
};

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double cutoff = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = es.eigenvalues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = inv[i] > cutoff ? 1.0 / inv[i] : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

VisibilityFit fringe_visibility(const std::vector<FringePoint>& points) {
  if (points.size() < 4) {
    throw DataError(fmt::format("fringe fit needs at least 4 points, got {}", points.size()));
  }
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) {
    return a.theta2_deg < b.theta2_deg;
  });
  if (hi->theta2_deg - lo->theta2_deg < 90.0 - 1e-9) {
    throw DataError("fringe fit needs theta2 points spanning at least 90 deg");
  }

  // E = a cos(2 theta) + b sin(2 theta), linear in (a, b).
  Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (const auto& p : points) {
    const double w = weight_of(p.e.sigma);
    const Eigen::Vector2d basis(std::cos(2 * deg2rad(p.theta2_deg)),
                                std::sin(2 * deg2rad(p.theta2_deg)));
    normal += w * basis * basis.transpose();
    rhs += w * p.e.e_value * basis;
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(normal);
  const auto sv = svd.singularValues();
  if (sv[1] <= 1e-10 * sv[0]) throw DataError("fringe fit is ill-conditioned");

  const Eigen::Matrix2d cov = normal.inverse();
  const Eigen::Vector2d ab = cov * rhs;
  const double v = ab.norm();
  VisibilityFit fit;
  fit.visibility = std::clamp(v, 0.0, 1.0);
  fit.theta0_deg = 0.5 * std::atan2(ab[1], ab[0]) * 180.0 / std::numbers::pi;
  if (v > 0) {
    const Eigen::Vector2d grad = ab / v;
    fit.sigma = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
  }
  const bool weighted = std::any_of(points.begin(), points.end(),
                                    [](const FringePoint& p) { return p.e.sigma > 0; });
  if (!weighted && points.size() > 2) {
    double rss = 0;
    for (const auto& p : points) {
      const double m = v * std::cos(2 * deg2rad(p.theta2_deg - fit.theta0_deg));
      rss += (p.e.e_value - m) * (p.e.e_value - m);
    }
    fit.sigma *= std::sqrt(rss / static_cast<double>(points.size() - 2));
  }
  return fit;
}

SmaxFit fit_smax(const std::vector<SmaxPoint>& points) {
  std::set<double> distinct;
  for (const auto& p : points) distinct.insert(p.g12);
  if (distinct.size() < 3) {
    throw DataError(fmt::format("Smax fit needs at least 3 distinct g12 values, got {}",
                                distinct.size()));
  }
  double svv = 0, svs = 0;
  bool weighted = false;
  for (const auto& p : points) {
    const double w = weight_of(p.sigma);
    weighted |= p.sigma > 0;
    const double v = visibility_from_g12(p.g12);
    svv += w * v * v;
    svs += w * v * p.s;
  }
  if (svv <= 0) throw DataError("Smax fit is degenerate: all g12 equal 1");

  SmaxFit fit;
  fit.smax = svs / svv;
  double rss = 0;
  for (const auto& p : points) {
    const double r = p.s - fit.smax * visibility_from_g12(p.g12);
    rss += weight_of(p.sigma) * r * r;
  }
  fit.residual_norm = std::sqrt(rss);
  fit.sigma = weighted ? 1.0 / std::sqrt(svv)
                       : std::sqrt(rss / static_cast<double>(points.size() - 1) / svv);
  fit.threshold_g12 = fit.smax > 2.0 ? g12_at_bell_threshold(fit.smax)
                                     : std::numeric_limits<double>::infinity();
  return fit;
}

Eigen::Matrix2d DecayFit::covariance_for(std::size_t series) const {
  const auto j = static_cast<Eigen::Index>(series + 1);
  Eigen::Matrix2d c;
  c << covariance(0, 0), covariance(0, j), covariance(j, 0), covariance(j, j);
  return c;
}

DecoherenceParams DecayFit::params_for(std::size_t series) const {
  DecoherenceParams p;
  p.k_khz = k_fit;
  p.xi = xi_fit.at(series);
  p.lande = lande;
  return p;
}

double DecayFit::g12_model(std::size_t series, double tau_us) const {
  const CoherenceTable table = coherence_table(cg_branching_weights(), lande);
  return g12_decay_model(tau_us, params_for(series), table, base_excess.at(series));
}

DecayFit fit_decay(const std::vector<DecaySeries>& series, const DecayFitOptions& options) {
  if (series.empty()) throw DataError("decay fit needs at least one series");
  if (!(options.initial_k_khz > 0)) throw ConfigError("initial K must be positive");

  const CoherenceTable table = coherence_table(cg_branching_weights(), options.lande);
  std::vector<DecayFunctor::Row> rows;
  std::vector<double> base;
  Eigen::VectorXd x(static_cast<Eigen::Index>(series.size()) + 1);
  x[0] = options.initial_k_khz;
  bool weighted = false;
  for (std::size_t c = 0; c < series.size(); ++c) {
    const auto& s = series[c];
    if (s.points.size() < 4) {
      throw DataError(fmt::format("series {} has {} points; at least 4 are needed", c,
                                  s.points.size()));
    }
    if (!(s.base_excess > 0)) throw DataError(fmt::format("series {}: base must be > 0", c));
    const auto first = std::min_element(s.points.begin(), s.points.end(), [](auto& a, auto& b) {
      return a.tau_us < b.tau_us;
    });
    if (first->tau_us > 1.0) {
      throw DataError(fmt::format("series {} lacks a point at tau <= 1 us", c));
    }
    for (const auto& p : s.points) {
      if (p.tau_us < 0 || p.sigma < 0) throw DataError(fmt::format("series {}: bad point", c));
      weighted |= p.sigma > 0;
      rows.push_back({c, p.tau_us, p.g12, p.sigma > 0 ? 1.0 / p.sigma : 1.0});
    }
    base.push_back(s.base_excess);
    x[static_cast<Eigen::Index>(c) + 1] = std::max(1e-3, (first->g12 - 1.0) / s.base_excess);
  }

  DecayFunctor functor(rows, base, table);
  Eigen::LevenbergMarquardt<DecayFunctor> lm(functor);
  lm.setMaxfev(options.max_function_evaluations);
  lm.setXtol(1e-12);
  lm.setFtol(1e-14);
  const auto status = lm.minimize(x);

  using namespace Eigen::LevenbergMarquardtSpace;
  if (status == ImproperInputParameters || status == TooManyFunctionEvaluation ||
      status == UserAsked || !x.allFinite()) {
    throw FitError(fmt::format("decay fit did not converge (status {}, {} evaluations)",
                               static_cast<int>(status), lm.nfev()),
                   std::vector<double>(x.data(), x.data() + x.size()));
  }

  DecayFit fit;
  fit.k_fit = std::abs(x[0]);
  fit.xi_fit.assign(x.data() + 1, x.data() + x.size());
  fit.base_excess = base;
  fit.lande = options.lande;
  fit.function_evaluations = static_cast<int>(lm.nfev());

  Eigen::VectorXd f(static_cast<Eigen::Index>(rows.size()));
  functor(x, f);
  fit.residual_norm = f.norm();
  if (!std::isfinite(fit.residual_norm)) {
    throw FitError("decay fit residual is not finite",
                   std::vector<double>(x.data(), x.data() + x.size()));
  }
  Eigen::MatrixXd j(static_cast<Eigen::Index>(rows.size()), x.size());
  functor.df(x, j);
  fit.covariance = pseudo_inverse(j.transpose() * j);
  const auto dof = static_cast<double>(rows.size()) - static_cast<double>(x.size());
  if (!weighted && dof > 0) fit.covariance *= f.squaredNorm() / dof;
  return fit;
}

std::vector<SDecayPoint> predict_s_decay(const DecayFit& fit, double smax,
                                         const std::vector<double>& tau_us) {
  std::vector<SDecayPoint> out;
  for (double tau : tau_us) {
    double sum = 0;
    for (std::size_t c = 0; c < fit.xi_fit.size(); ++c) sum += fit.g12_model(c, tau);
    const double gbar = sum / static_cast<double>(fit.xi_fit.size());
    out.push_back({tau, gbar, s_from_g12(smax, gbar)});
  }
  return out;
}

}  // namespace dlcz
