#include "dlcz/config.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace dlcz {
namespace {

struct UnitDef {
  std::string_view name;
  Dimension dim;
  double si;  // value of one unit in SI (degrees for angles)
};

constexpr UnitDef kUnits[] = {
    {"s", Dimension::Time, 1.0},          {"ms", Dimension::Time, 1e-3},
    {"us", Dimension::Time, 1e-6},        {"ns", Dimension::Time, 1e-9},
    {"Hz", Dimension::Frequency, 1.0},    {"kHz", Dimension::Frequency, 1e3},
    {"MHz", Dimension::Frequency, 1e6},   {"deg", Dimension::Angle, 1.0},
    {"rad", Dimension::Angle, 180.0 / std::numbers::pi},
    {"m", Dimension::Length, 1.0},        {"mm", Dimension::Length, 1e-3},
    {"T/m", Dimension::Gradient, 1.0},    {"G/cm", Dimension::Gradient, 1e-2},
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view s, std::string_view field) {
  s = trim(s);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(field) + ": expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

const UnitDef& find_unit(std::string_view name, Dimension dim, std::string_view field) {
  for (const auto& u : kUnits) {
    if (u.name == name && u.dim == dim) return u;
  }
  throw ConfigError(std::string(field) + ": unknown or wrong-dimension unit '" +
                    std::string(name) + "'");
}

/// Number and unit of `value unit`; the unit is mandatory.
std::pair<double, const UnitDef*> split_quantity(std::string_view text, Dimension dim,
                                                 std::string_view field) {
  text = trim(text);
  const auto sp = text.find_first_of(" \t");
  if (sp == std::string_view::npos) {
    throw ConfigError(std::string(field) + ": missing unit suffix in '" + std::string(text) + "'");
  }
  const double number = parse_double(text.substr(0, sp), field);
  const UnitDef& unit = find_unit(trim(text.substr(sp)), dim, field);
  return {number, &unit};
}

/// Value in `target` units; exact when the text already uses `target`.
double parse_in_unit(std::string_view text, Dimension dim, std::string_view field,
                     std::string_view target) {
  const auto [number, unit] = split_quantity(text, dim, field);
  if (unit->name == target) return number;
  return number * unit->si / find_unit(target, dim, field).si;
}

struct Field {
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view)> parse;
  std::function<std::string(const ExperimentConfig&)> print;
};

template <class Getter>
Field quantity(std::string_view key, Dimension dim, std::string_view unit, Getter get) {
  return {key,
          [=](ExperimentConfig& c, std::string_view v) { get(c) = parse_in_unit(v, dim, key, unit); },
          [=](const ExperimentConfig& c) {
            return format_number(get(c)) + " " + std::string(unit);
          }};
}

template <class Getter>
Field number(std::string_view key, Getter get) {
  return {key, [=](ExperimentConfig& c, std::string_view v) { get(c) = parse_double(v, key); },
          [=](const ExperimentConfig& c) {
            return format_number(get(c));
          }};
}

template <class Getter>
Field count(std::string_view key, Getter get) {
  return {key,
          [=](ExperimentConfig& c, std::string_view v) {
            v = trim(v);
            int n = 0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
            if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
              throw ConfigError(std::string(key) + ": expected an integer, got '" +
                                std::string(v) + "'");
            }
            get(c) = n;
          },
          [=](const ExperimentConfig& c) {
            return std::to_string(get(c));
          }};
}

template <class E, class Getter>
Field choice(std::string_view key, std::vector<std::pair<std::string_view, E>> options,
             Getter get) {
  return {key,
          [=](ExperimentConfig& c, std::string_view v) {
            v = trim(v);
            for (const auto& [name, value] : options) {
              if (name == v) {
                get(c) = value;
                return;
              }
            }
            std::string allowed;
            for (const auto& [name, value] : options) allowed += " " + std::string(name);
            throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not one of" +
                              allowed);
          },
          [=](const ExperimentConfig& c) {
            const E value = get(c);
            for (const auto& [name, v] : options) {
              if (v == value) return std::string(name);
            }
            return std::string("?");
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      quantity("mot_rate", Dimension::Frequency, "Hz",
               [](auto& c) -> auto& { return c.timing.mot_rate_hz; }),
      quantity("mot_off_window", Dimension::Time, "ms",
               [](auto& c) -> auto& { return c.timing.mot_off_window_ms; }),
      quantity("field_decay_wait", Dimension::Time, "ms",
               [](auto& c) -> auto& { return c.timing.field_decay_wait_ms; }),
      count("trials_per_window", [](auto& c) -> auto& { return c.timing.trials_per_window; }),
      quantity("trial_period", Dimension::Time, "us",
               [](auto& c) -> auto& { return c.timing.trial_period_us; }),
      quantity("write_read_delay", Dimension::Time, "ns",
               [](auto& c) -> auto& { return c.timing.write_read_delay_ns; }),
      quantity("pulse_duration", Dimension::Time, "ns",
               [](auto& c) -> auto& { return c.timing.pulse_duration_ns; }),
      quantity("repump_duration", Dimension::Time, "us",
               [](auto& c) -> auto& { return c.timing.repump_duration_us; }),
      quantity("tau", Dimension::Time, "us", [](auto& c) -> auto& { return c.timing.tau_us; }),
      quantity("tau_max", Dimension::Time, "us",
               [](auto& c) -> auto& { return c.timing.tau_max_us; }),
      count("windows", [](auto& c) -> auto& { return c.windows; }),

      number("p_excitation", [](auto& c) -> auto& { return c.optics.p_excitation; }),
      number("eta1", [](auto& c) -> auto& { return c.optics.eta1; }),
      number("eta2_base", [](auto& c) -> auto& { return c.optics.eta2_base; }),
      number("bg1", [](auto& c) -> auto& { return c.optics.bg1; }),
      number("bg2", [](auto& c) -> auto& { return c.optics.bg2; }),
      choice<PairStatistics>("pair_statistics",
                             {{"poisson", PairStatistics::Poisson},
                              {"thermal", PairStatistics::Thermal},
                              {"single", PairStatistics::Single},
                              {"forced", PairStatistics::Forced}},
                             [](auto& c) -> auto& { return c.optics.pair_statistics; }),
      choice<bool>("coherence_dephasing", {{"off", false}, {"on", true}},
                   [](auto& c) -> auto& { return c.optics.coherence_dephasing; }),
      {"eta",
       [](C& c, std::string_view v) {
         if (trim(v) == "cs") {
           c.eta_rad.reset();
           return;
         }
         c.eta_rad = parse_in_unit(v, Dimension::Angle, "eta", "rad");
       },
       [](const C& c) {
         return c.eta_rad ? format_number(*c.eta_rad) + " rad" : std::string("cs");
       }},
      quantity("phase", Dimension::Angle, "rad", [](auto& c) -> auto& { return c.phase_rad; }),

      quantity("k", Dimension::Frequency, "kHz",
               [](auto& c) -> auto& { return c.decoherence.k_khz; }),
      {"field_gradient",
       [](C& c, std::string_view v) {
         // `L_value unit, b_value unit`
         const auto comma = v.find(',');
         if (comma == std::string_view::npos) {
           throw ConfigError("field_gradient: expected '<length> <unit>, <gradient> <unit>'");
         }
         FieldGradient g;
         g.length_m = parse_in_unit(v.substr(0, comma), Dimension::Length, "field_gradient", "m");
         g.gradient_tesla_per_m =
             parse_in_unit(v.substr(comma + 1), Dimension::Gradient, "field_gradient", "T/m");
         c.decoherence.raw = g;
       },
       [](const C& c) {
         if (!c.decoherence.raw) return std::string("none");
         return format_number(c.decoherence.raw->length_m) + " m, " +
                format_number(c.decoherence.raw->gradient_tesla_per_m) + " T/m";
       }},

      choice<AnalyzerMode>("analyzer",
                           {{"fixed", AnalyzerMode::Fixed},
                            {"chsh", AnalyzerMode::Chsh},
                            {"fringe", AnalyzerMode::Fringe}},
                           [](auto& c) -> auto& { return c.analyzer.mode; }),
      quantity("theta1", Dimension::Angle, "deg",
               [](auto& c) -> auto& { return c.analyzer.theta1_deg; }),
      quantity("theta2", Dimension::Angle, "deg",
               [](auto& c) -> auto& { return c.analyzer.theta2_deg; }),
      count("fringe_steps", [](auto& c) -> auto& { return c.analyzer.fringe_steps; }),
  };
  return table;
}

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

double parse_quantity(std::string_view text, Dimension dim, std::string_view field) {
  const auto [number, unit] = split_quantity(text, dim, field);
  return number * unit->si;
}

void OpticsConfig::validate() const {
  const auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + ": must lie in [0,1]");
  };
  prob(eta1, "eta1");
  prob(eta2_base, "eta2_base");
  prob(bg1, "bg1");
  prob(bg2, "bg2");
  if (!(p_excitation >= 0.0)) throw ConfigError("p_excitation: must be >= 0");
  if (pair_statistics != PairStatistics::Poisson && pair_statistics != PairStatistics::Thermal) {
    prob(p_excitation, "p_excitation");
  }
}

void ExperimentConfig::validate() const {
  timing.validate();
  optics.validate();
  try {
    decoherence.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("k: ") + e.what());
  }
  if (eta_rad && !(*eta_rad >= 0.0 && *eta_rad <= std::numbers::pi / 2)) {
    throw ConfigError("eta: must lie in [0, pi/2]");
  }
  if (windows <= 0) throw ConfigError("windows: must be > 0");
  if (analyzer.mode == AnalyzerMode::Chsh && windows < 5) {
    throw ConfigError("windows: chsh mode needs at least 5 windows (one per segment)");
  }
  if (analyzer.mode == AnalyzerMode::Fringe) {
    if (analyzer.fringe_steps < 1) throw ConfigError("fringe_steps: must be >= 1");
    if (windows < analyzer.fringe_steps) {
      throw ConfigError("windows: fringe mode needs at least one window per step");
    }
  }
}

MixingAngle ExperimentConfig::mixing_angle() const {
  if (eta_rad) return MixingAngle{*eta_rad};
  static const MixingAngle cs = effective_eta(cg_branching_weights(4, 4, 3));
  return cs;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::map<std::string, int, std::less<>> seen;
  bool k_given = false;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + key +
                        " repeated (first on line " + std::to_string(it->second) + ")");
    }
    seen.emplace(key, line_no);
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.key == key) field = &f;
    }
    if (field == nullptr) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (key == "field_gradient" && value == "none") continue;
    if (key == "k") k_given = true;
    try {
      field->parse(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (config.decoherence.raw && !k_given) {
    config.decoherence.k_khz = zeeman_spread_khz(*config.decoherence.raw, config.decoherence.lande);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string(f.key) + " = " + f.print(config) + "\n";
  }
  return out;
}

}  // namespace dlcz
