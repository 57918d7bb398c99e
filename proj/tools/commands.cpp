#include "commands.hpp"

#include "manifest.hpp"

#include "dlcz/errors.hpp"
#include "dlcz/event_log.hpp"
#include "dlcz/sweep.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace dlcz::cli {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Block-structured result records: "[name]" followed by key = value lines.
class Records {
 public:
  Records& block(std::string_view name) {
    if (!text_.empty()) text_ += '\n';
    text_ += fmt::format("[{}]\n", name);
    return *this;
  }
  template <class T>
  Records& field(std::string_view key, const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
      text_ += fmt::format("{} = {}\n", key, std::isnan(v) ? "nan" : format_number(v));
    } else {
      text_ += fmt::format("{} = {}\n", key, v);
    }
    return *this;
  }
  Records& settings(const GroupKey& k) {
    return field("theta1_deg", k.theta1_deg()).field("theta2_deg", k.theta2_deg()).field("tau_us", k.tau_us());
  }
  Records& line(std::string_view s) {
    text_ += s;
    text_ += '\n';
    return *this;
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

fs::path resolve_out(const std::string& out, const std::string& fallback_name) {
  if (!out.empty()) return fs::path(out);
  return fs::path(default_out_dir()) / fallback_name;
}

fs::path parent_or_dot(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  write_file_atomically(out, text);
}

void record_outputs(const Common& common, const fs::path& out, RunManifest m) {
  m.command = common.command_line;
  m.outputs.push_back(out.string());
  append_manifest(parent_or_dot(out), std::move(m));
}

std::string analyze_records(const EventLog& log, CoincidenceWindow window) {
  Records r;
  r.block("run").field("run_id", log.run_id).field("seed", log.seed).field("n_trials", log.total_trials());
  if (window) r.field("window_ns", *window);
  if (log.events.empty()) {
    r.line("status = no groups");
    return r.text();
  }
  const auto groups = summarize(log, window);
  std::map<std::int64_t, std::vector<const GroupSummary*>> by_tau;
  for (const auto& g : groups) {
    by_tau[g.key.tau_ns].push_back(&g);
    const auto& c = g.coincidences;
    r.block("E").settings(g.key).field("n_trials", g.n_trials);
    r.line(fmt::format("counts_tt_tr_rt_rr = {} {} {} {}", c.c_tt, c.c_tr, c.c_rt, c.c_rr));
    try {
      const auto e = correlation_e(c);
      r.field("value", e.e_value).field("sigma", e.sigma);
    } catch (const DataError& err) {
      r.line(fmt::format("status = undefined: {}", err.what()));
    }
    r.block("g12").settings(g.key).field("n_trials", g.n_trials);
    try {
      const PairEstimate p = estimate_g12(g);
      r.field("p1", p.p1).field("sigma_p1", p.sigma_p1);
      r.field("p2", p.p2).field("sigma_p2", p.sigma_p2);
      r.field("g12", p.g12).field("sigma_g12", p.sigma_g12);
      r.field("g12_a", p.g12_a).field("sigma_g12_a", p.sigma_g12_a);
      r.field("g12_b", p.g12_b).field("sigma_g12_b", p.sigma_g12_b);
      r.field("g12_bar", p.g12_bar).field("sigma_g12_bar", p.sigma_g12_bar);
      r.block("pc").settings(g.key).field("value", p.p_c).field("sigma", p.sigma_p_c);
      r.block("V").settings(g.key).field("value", p.visibility_model);
    } catch (const DataError& err) {
      r.line(fmt::format("status = undefined: {}", err.what()));
    }
  }
  for (const auto& [tau_ns, gs] : by_tau) {
    try {
      const BellEstimate b = chsh_from_summaries(groups, log.config.analyzer.chsh, tau_ns);
      r.block("S").field("tau_us", tau_ns * 1e-3).field("value", b.s_value).field("sigma", b.sigma);
      r.field("violation_sigmas", b.violation_sigmas());
    } catch (const DataError&) {
      // Not a CHSH group set.
    }
    std::vector<FringePoint> fringe;
    for (const auto* g : gs) {
      if (g->coincidences.total() > 0) {
        fringe.push_back({g->key.theta2_deg(), correlation_e(g->coincidences)});
      }
    }
    if (log.config.analyzer.mode == AnalyzerMode::Fringe) {
      try {
        const VisibilityFit v = fringe_visibility(fringe);
        r.block("fringe").field("tau_us", tau_ns * 1e-3).field("visibility", v.visibility);
        r.field("sigma", v.sigma).field("theta0_deg", v.theta0_deg);
      } catch (const DataError& err) {
        r.block("fringe").line(fmt::format("status = undefined: {}", err.what()));
      }
    }
  }
  return r.text();
}

std::string analyze_table(const EventLog& log, CoincidenceWindow window) {
  std::string out =
      "theta1_deg\ttheta2_deg\ttau_us\tn_trials\tp1\tp2\tpc\tsigma_pc\tg12\tsigma_g12\tg12_a\t"
      "sigma_g12_a\tg12_b\tsigma_g12_b\tgbar\tsigma_gbar\n";
  for (const auto& g : summarize(log, window)) {
    if (g.n_field1 == 0 || g.n_field2 == 0) continue;
    const PairEstimate p = estimate_g12(g);
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                       format_number(g.key.theta1_deg()), format_number(g.key.theta2_deg()),
                       format_number(g.key.tau_us()), g.n_trials, format_number(p.p1),
                       format_number(p.p2), format_number(p.p_c), format_number(p.sigma_p_c),
                       format_number(p.g12), format_number(p.sigma_g12), format_number(p.g12_a),
                       format_number(p.sigma_g12_a), format_number(p.g12_b),
                       format_number(p.sigma_g12_b), format_number(p.g12_bar),
                       format_number(p.sigma_g12_bar));
  }
  return out;
}

Table load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  return read_table(in);
}

std::string table_axis(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# axis = ", 0) == 0) return line.substr(9);
    if (!line.empty() && line[0] != '#') break;
  }
  return {};
}

bool usable(double v) { return std::isfinite(v); }

std::vector<SmaxPoint> smax_points(const Table& t) {
  std::vector<SmaxPoint> pts;
  const auto g = t.values("gbar");
  const auto s = t.values("S");
  const auto e = t.values("sigma_S");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (usable(g[i]) && usable(s[i]) && usable(e[i])) pts.push_back({g[i], s[i], e[i]});
  }
  return pts;
}

std::vector<DecaySeries> decay_series(const Table& t) {
  const auto tau = t.values("tau_us");
  std::vector<DecaySeries> series(2);
  const char* names[2][2] = {{"g12_a", "sigma_g12_a"}, {"g12_b", "sigma_g12_b"}};
  for (int c = 0; c < 2; ++c) {
    const auto g = t.values(names[c][0]);
    const auto e = t.values(names[c][1]);
    for (std::size_t i = 0; i < tau.size(); ++i) {
      if (usable(g[i]) && usable(e[i]) && g[i] > 0) series[c].points.push_back({tau[i], g[i], e[i]});
    }
  }
  return series;
}

std::string fit_records(const Table& t, const std::string& model) {
  Records r;
  if (model == "smax") {
    const SmaxFit f = fit_smax(smax_points(t));
    r.block("fit_smax").field("smax", f.smax).field("sigma", f.sigma);
    r.field("threshold_gbar", f.threshold_g12).field("residual_norm", f.residual_norm);
  } else if (model == "decay") {
    const DecayFit f = fit_decay(decay_series(t));
    const Eigen::Matrix2d ca = f.covariance_for(0);
    const Eigen::Matrix2d cb = f.covariance_for(1);
    r.block("fit_decay").field("k_khz", f.k_fit).field("sigma_k_khz", std::sqrt(ca(0, 0)));
    r.field("xi_a", f.xi_fit[0]).field("sigma_xi_a", std::sqrt(ca(1, 1)));
    r.field("xi_b", f.xi_fit[1]).field("sigma_xi_b", std::sqrt(cb(1, 1)));
    r.field("residual_norm", f.residual_norm);
  } else {
    throw ConfigError(fmt::format("unknown model '{}' (smax, decay)", model));
  }
  return r.text();
}

}  // namespace

std::string default_out_dir() {
  const char* env = std::getenv("DLCZ_OUT_DIR");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string(".");
}

int cmd_simulate(const Common& common, const SimulateArgs& args) {
  const std::string text = read_file(args.config);
  const ExperimentConfig config = parse_config(text);
  const EventLog log = simulate_run(config, args.seed, {common.threads, false});
  const fs::path out = resolve_out(args.out, fmt::format("run_{}.log", log.run_id));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomically(out.string(), to_text(log));

  RunManifest m;
  m.id = log.run_id;
  m.config_text = to_config_text(config);
  m.seed = args.seed;
  m.inputs = {args.config};
  record_outputs(common, out, std::move(m));
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_analyze(const Common& common, const AnalyzeArgs& args) {
  const EventLog log = load_event_log(args.log);
  std::string text = args.table ? analyze_table(log, common.window)
                                : analyze_records(log, common.window);
  text = fmt::format("# source = {}\n", log.run_id) + text;
  emit(args.out, text);
  if (!args.out.empty() && args.out != "-") {
    RunManifest m;
    m.id = manifest_id(common.command_line, log.run_id);
    m.inputs = {args.log};
    record_outputs(common, args.out, std::move(m));
  }
  return 0;
}

int cmd_sweep(const Common& common, const SweepArgs& args) {
  const std::string text = read_file(args.config);
  const ExperimentConfig config = parse_config(text);
  const SweepSpec spec = parse_sweep_axis(args.axis);
  SweepOptions options;
  options.simulation.threads = common.threads;
  options.window = common.window;
  const auto rows = run_sweep(config, spec, args.seed, options);

  const std::string id = manifest_id(common.command_line, to_config_text(config) + args.axis +
                                                               std::to_string(args.seed));
  std::ostringstream table;
  table << "# manifest = " << id << '\n';
  write_sweep_table(table, spec.axis, rows);
  const fs::path out = resolve_out(args.out, fmt::format("sweep_{}.tsv", to_string(spec.axis)));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomically(out.string(), table.str());

  RunManifest m;
  m.id = id;
  m.config_text = to_config_text(config);
  m.seed = args.seed;
  m.inputs = {args.config};
  record_outputs(common, out, std::move(m));
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_fit(const Common& common, const FitArgs& args) {
  const Table t = load_table(args.table);
  const std::string text = fit_records(t, args.model);
  emit(args.out, text);
  if (!args.out.empty() && args.out != "-") {
    RunManifest m;
    m.id = manifest_id(common.command_line, read_file(args.table));
    m.inputs = {args.table};
    record_outputs(common, args.out, std::move(m));
  }
  return 0;
}

int cmd_report(const Common& common, const ReportArgs& args) {
  if (!fs::is_directory(args.dir)) throw DataError(fmt::format("{} is not a directory", args.dir));
  std::vector<fs::path> tables;
  for (const auto& e : fs::directory_iterator(args.dir)) {
    if (e.path().extension() == ".tsv") tables.push_back(e.path());
  }
  std::sort(tables.begin(), tables.end());

  const fs::path out_dir = args.out.empty() ? fs::path(args.dir) / "report" : fs::path(args.out);
  fs::create_directories(out_dir);
  std::vector<std::string> inputs, outputs;
  std::string payload;
  const auto write = [&](const std::string& name, const std::string& text) {
    const fs::path p = out_dir / name;
    write_file_atomically(p.string(), text);
    outputs.push_back(p.string());
  };

  const double smax_model = chsh_max_canonical(effective_eta(cg_branching_weights()));
  for (const auto& path : tables) {
    const std::string axis = table_axis(path.string());
    if (axis.empty()) continue;
    const Table t = load_table(path.string());
    inputs.push_back(path.string());
    payload += read_file(path.string());
    const std::string stem = path.stem().string();

    if (axis == "p_excitation") {
      std::string curve = "# S vs gbar\ngbar\tS\tsigma_S\n";
      for (const auto& p : smax_points(t)) {
        curve += fmt::format("{}\t{}\t{}\n", format_number(p.g12), format_number(p.s),
                           format_number(p.sigma));
      }
      try {
        const SmaxFit f = fit_smax(smax_points(t));
        curve += fmt::format("# fit: smax = {} sigma = {} threshold_gbar = {}\n",
                           format_number(f.smax), format_number(f.sigma),
                           format_number(f.threshold_g12));
      } catch (const DataError& err) {
        curve += fmt::format("# fit: unavailable ({})\n", err.what());
      }
      write(fmt::format("s_vs_gbar_{}.tsv", stem), curve);
    } else if (axis == "tau_us") {
      const auto tau = t.values("tau_us");
      const auto s = t.values("S");
      const auto es = t.values("sigma_S");
      std::string s_tau = "# S vs tau\ntau_us\tS\tsigma_S\n";
      for (std::size_t i = 0; i < tau.size(); ++i) {
        if (usable(s[i])) {
          s_tau += fmt::format("{}\t{}\t{}\n", format_number(tau[i]), format_number(s[i]),
                               format_number(es[i]));
        }
      }
      std::string g_tau = "# g12 vs tau\ntau_us\tg12_a\tsigma_g12_a\tg12_b\tsigma_g12_b\n";
      const auto ga = t.values("g12_a"), sa = t.values("sigma_g12_a");
      const auto gb = t.values("g12_b"), sb = t.values("sigma_g12_b");
      for (std::size_t i = 0; i < tau.size(); ++i) {
        g_tau += fmt::format("{}\t{}\t{}\t{}\t{}\n", format_number(tau[i]), format_number(ga[i]),
                             format_number(sa[i]), format_number(gb[i]), format_number(sb[i]));
      }
      try {
        const DecayFit f = fit_decay(decay_series(t));
        std::vector<double> grid;
        const double top = *std::max_element(tau.begin(), tau.end());
        for (int i = 0; i <= 100; ++i) grid.push_back(top * i / 100.0);
        std::string model = fmt::format("# model: k_khz = {} xi_a = {} xi_b = {} smax = {}\n",
                                        format_number(f.k_fit), format_number(f.xi_fit[0]),
                                        format_number(f.xi_fit[1]), format_number(smax_model));
        model += "tau_us\tgbar_model\tS_model\n";
        for (const auto& p : predict_s_decay(f, smax_model, grid)) {
          model += fmt::format("{}\t{}\t{}\n", format_number(p.tau_us), format_number(p.g12_bar),
                               format_number(p.s));
        }
        write(fmt::format("model_vs_tau_{}.tsv", stem), model);
      } catch (const std::runtime_error& err) {
        g_tau += fmt::format("# decay fit unavailable ({})\n", err.what());
      }
      write(fmt::format("s_vs_tau_{}.tsv", stem), s_tau);
      write(fmt::format("g12_vs_tau_{}.tsv", stem), g_tau);
    }
  }
  if (inputs.empty()) throw DataError(fmt::format("no sweep tables found in {}", args.dir));

  RunManifest m;
  m.id = manifest_id(common.command_line, payload);
  m.command = common.command_line;
  m.inputs = inputs;
  m.outputs = outputs;
  append_manifest(out_dir, std::move(m));
  for (const auto& o : outputs) std::cout << o << '\n';
  return 0;
}

}  // namespace dlcz::cli
