#include "dlcz/sweep.hpp"

#include "dlcz/errors.hpp"
#include "dlcz/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dlcz {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (std::size_t pos; (pos = s.find(sep)) != std::string_view::npos; s.remove_prefix(pos + 1)) {
    out.push_back(s.substr(0, pos));
  }
  out.push_back(s);
  return out;
}

double to_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
  }
  return v;
}

std::vector<double> parse_values(std::string_view text, std::string_view what) {
  const auto parts = split(text, ':');
  if (parts.size() == 4 && (trim(parts[0]) == "lin" || trim(parts[0]) == "log")) {
    const double a = to_double(parts[1], what);
    const double b = to_double(parts[2], what);
    const double n = to_double(parts[3], what);
    if (n < 2 || n != std::floor(n)) throw ConfigError(fmt::format("{}: count must be >= 2", what));
    const bool log = trim(parts[0]) == "log";
    if (log && (a <= 0 || b <= 0)) {
      throw ConfigError(fmt::format("{}: log range needs positive ends", what));
    }
    std::vector<double> v;
    const int count = static_cast<int>(n);
    for (int i = 0; i < count; ++i) {
      const double f = static_cast<double>(i) / (count - 1);
      v.push_back(log ? a * std::pow(b / a, f) : a + (b - a) * f);
    }
    return v;
  }
  std::vector<double> v;
  for (auto p : split(text, ',')) v.push_back(to_double(p, what));
  return v;
}

std::string cell(double v) { return std::isnan(v) ? "nan" : format_number(v); }

}  // namespace

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::PExcitation: return "p_excitation";
    case SweepAxis::Tau: return "tau_us";
    case SweepAxis::Theta2: return "theta2_deg";
  }
  return "?";
}

SweepSpec parse_sweep_axis(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(fmt::format("axis '{}': expected <axis>=<values>", text));
  }
  const std::string_view name = trim(text.substr(0, eq));
  std::string_view rest = trim(text.substr(eq + 1));

  SweepSpec spec;
  double scale = 1.0;
  if (name == "p_excitation") {
    spec.axis = SweepAxis::PExcitation;
  } else if (name == "tau" || name == "theta2") {
    spec.axis = name == "tau" ? SweepAxis::Tau : SweepAxis::Theta2;
    const auto sp = rest.rfind(' ');
    if (sp == std::string_view::npos) {
      throw ConfigError(fmt::format("axis {}: values need a unit suffix", name));
    }
    const std::string unit(trim(rest.substr(sp + 1)));
    rest = trim(rest.substr(0, sp));
    if (spec.axis == SweepAxis::Tau) {
      scale = parse_quantity("1 " + unit, Dimension::Time, "axis tau") * 1e6;
    } else {
      scale = parse_quantity("1 " + unit, Dimension::Angle, "axis theta2");
    }
  } else {
    throw ConfigError(fmt::format("unknown sweep axis '{}' (p_excitation, tau, theta2)", name));
  }
  spec.values = parse_values(rest, fmt::format("axis {}", name));
  for (double& v : spec.values) v *= scale;
  if (spec.values.empty()) throw ConfigError("sweep axis has no values");
  return spec;
}

ExperimentConfig sweep_point_config(const ExperimentConfig& base, const SweepSpec& spec,
                                    std::size_t i) {
  ExperimentConfig c = base;
  const double v = spec.values.at(i);
  switch (spec.axis) {
    case SweepAxis::PExcitation: c.optics.p_excitation = v; break;
    case SweepAxis::Tau:
      c.timing.tau_us = v;
      c.timing.tau_max_us = std::max(c.timing.tau_max_us, v);
      break;
    case SweepAxis::Theta2:
      c.analyzer.mode = AnalyzerMode::Fixed;
      c.analyzer.theta2_deg = v;
      break;
  }
  c.validate();
  return c;
}

std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t i) {
  SplitMix64 rng = substream(seed, 0x5eedULL + i);
  return rng();
}

SweepRow summarize_run(const EventLog& log, CoincidenceWindow window) {
  const ExperimentConfig& c = log.config;
  SweepRow row;
  row.p_excitation = c.optics.p_excitation;
  row.tau_us = c.timing.tau_us;
  row.theta1_deg = c.analyzer.theta1_deg;
  row.theta2_deg = c.analyzer.theta2_deg;
  row.seed = log.seed;
  row.run_id = log.run_id;
  row.n_trials = log.total_trials();
  row.e = row.sigma_e = row.s = row.sigma_s = kNaN;
  row.visibility = row.sigma_visibility = kNaN;

  const auto groups = summarize(log, window);
  if (groups.empty()) throw DataError("run has no trials");
  const std::int64_t tau_ns = groups.front().key.tau_ns;
  const auto find = [&](double t1, double t2) -> const GroupSummary* {
    for (const auto& g : groups) {
      if (g.key.theta1_mdeg == to_mdeg(t1) && g.key.theta2_mdeg == to_mdeg(t2)) return &g;
    }
    return nullptr;
  };

  // Observables a sparse run cannot define stay NaN rather than failing the sweep.
  const auto pairs_of = [&](const GroupSummary& g) {
    if (g.n_field1 > 0 && g.n_field2 > 0) return estimate_g12(g);
    PairEstimate p;
    p.key = g.key;
    p.n_trials = g.n_trials;
    for (double* v : {&p.p1, &p.sigma_p1, &p.p2, &p.sigma_p2, &p.p12, &p.sigma_p12, &p.g12,
                      &p.sigma_g12, &p.p_c, &p.sigma_p_c, &p.visibility_model, &p.g12_a,
                      &p.sigma_g12_a, &p.g12_b, &p.sigma_g12_b, &p.g12_bar, &p.sigma_g12_bar}) {
      *v = kNaN;
    }
    return p;
  };
  const auto defined = [](const GroupSummary& g) { return g.coincidences.total() > 0; };

  switch (c.analyzer.mode) {
    case AnalyzerMode::Chsh: {
      row.theta1_deg = row.theta2_deg = 0.0;
      const GroupSummary* ref = find(0.0, 0.0);
      if (ref == nullptr) throw DataError("CHSH run lacks the (0, 0) reference setting");
      row.pairs = pairs_of(*ref);
      const AnalyzerSettings& a = c.analyzer.chsh;
      bool complete = true;
      for (auto [t1, t2] : {std::pair{a.theta1, a.theta2}, std::pair{a.theta1p, a.theta2},
                            std::pair{a.theta1, a.theta2p}, std::pair{a.theta1p, a.theta2p}}) {
        const GroupSummary* g = find(t1, t2);
        complete = complete && g != nullptr && defined(*g);
      }
      if (complete) {
        const BellEstimate b = chsh_from_summaries(groups, a, tau_ns);
        row.s = b.s_value;
        row.sigma_s = b.sigma;
      }
      break;
    }
    case AnalyzerMode::Fixed: {
      row.pairs = pairs_of(groups.front());
      if (defined(groups.front())) {
        const auto e = correlation_e(groups.front().coincidences);
        row.e = e.e_value;
        row.sigma_e = e.sigma;
      }
      break;
    }
    case AnalyzerMode::Fringe: {
      std::vector<FringePoint> points;
      for (const auto& g : groups) {
        if (defined(g)) points.push_back({g.key.theta2_deg(), correlation_e(g.coincidences)});
      }
      try {
        const VisibilityFit v = fringe_visibility(points);
        row.visibility = v.visibility;
        row.sigma_visibility = v.sigma;
      } catch (const DataError&) {
        // Too few defined points for a fringe.
      }
      row.theta2_deg = 0.0;
      const GroupSummary* ref = find(c.analyzer.theta1_deg, 0.0);
      row.pairs = pairs_of(ref != nullptr ? *ref : groups.front());
      break;
    }
  }
  return row;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SweepSpec& spec,
                                std::uint64_t seed, const SweepOptions& options) {
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const ExperimentConfig c = sweep_point_config(base, spec, i);
    const EventLog log = simulate_run(c, sweep_point_seed(seed, i), options.simulation);
    SweepRow row = summarize_run(log, options.window);
    row.axis_value = spec.values[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_table(std::ostream& out, SweepAxis axis, const std::vector<SweepRow>& rows) {
  out << "# axis = " << to_string(axis) << '\n';
  out << "axis_value\tp_excitation\ttau_us\ttheta1_deg\ttheta2_deg\tn_trials\tp1\tp2\tpc\t"
         "sigma_pc\tg12\tsigma_g12\tg12_a\tsigma_g12_a\tg12_b\tsigma_g12_b\tgbar\tsigma_gbar\t"
         "E\tsigma_E\tS\tsigma_S\tV\tsigma_V\tseed\n";
  for (const auto& r : rows) {
    const auto& p = r.pairs;
    out << fmt::format(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}"
        "\t{}\n",
        cell(r.axis_value), cell(r.p_excitation), cell(r.tau_us), cell(r.theta1_deg),
        cell(r.theta2_deg), r.n_trials, cell(p.p1), cell(p.p2), cell(p.p_c), cell(p.sigma_p_c),
        cell(p.g12), cell(p.sigma_g12), cell(p.g12_a), cell(p.sigma_g12_a), cell(p.g12_b),
        cell(p.sigma_g12_b), cell(p.g12_bar), cell(p.sigma_g12_bar), cell(r.e), cell(r.sigma_e),
        cell(r.s), cell(r.sigma_s), cell(r.visibility), cell(r.sigma_visibility), r.seed);
  }
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw DataError(fmt::format("table has no column '{}'", name));
  return static_cast<std::size_t>(it - columns.begin());
}

bool Table::has(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> Table::values(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto cells = split(s, '\t');
    if (t.columns.empty()) {
      for (auto c : cells) t.columns.emplace_back(trim(c));
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw DataError(fmt::format("line {}: expected {} cells, got {}", line_no, t.columns.size(),
                                  cells.size()));
    }
    std::vector<double> row;
    for (auto c : cells) {
      c = trim(c);
      if (c == "nan") {
        row.push_back(kNaN);
        continue;
      }
      double v = 0;
      const auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc{} || end != c.data() + c.size()) {
        throw DataError(fmt::format("line {}: '{}' is not a number", line_no, c));
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw DataError("table has no header");
  return t;
}

}  // namespace dlcz
