#include "nanonmr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "nanonmr/analysis.hpp"
#include "nanonmr/analytic.hpp"
#include "nanonmr/correlation.hpp"
#include "nanonmr/errors.hpp"
#include "nanonmr/md.hpp"
#include "nanonmr/parallel.hpp"
#include "nanonmr/propagator.hpp"
#include "nanonmr/protocol.hpp"
#include "nanonmr/signal.hpp"

#ifndef NANONMR_PRESET_DIR
#define NANONMR_PRESET_DIR "presets"
#endif

namespace nanonmr::cli {

namespace fs = std::filesystem;

namespace {

using Schema = std::map<std::string, std::set<std::string>>;

// Allowed keys per section; "" is the top level.
const Schema& schema() {
  static const Schema s = {
      {"", {"subcommand", "description", "seed", "geometry", "sweep", "physics", "truncation", "correlation",
            "propagator", "protocol", "md", "analyze", "fit"}},
      {"geometry", {"shape", "R", "L", "d"}},
      {"sweep", {"d", "R", "L", "m"}},
      {"physics", {"D", "J", "gamma_e", "p"}},
      {"truncation", {"radial", "second", "azimuthal"}},
      {"correlation", {"m", "points", "t_min", "t_max", "rel_tol", "short_window", "power_window", "long_window"}},
      {"propagator", {"r", "r0", "times"}},
      {"protocol", {"delta", "tau", "T", "T_m", "dead_time", "t", "d3_over_V", "qdyne"}},
      {"md", {"N", "shape", "R", "L", "depths", "n_steps", "runs", "stride", "wall", "dt", "temperature", "cutoff",
              "friction", "equilibration_time", "skin", "epsilon", "sigma", "mass"}},
      {"analyze", {"manifest", "traces", "max_lag_fraction", "d_over_R", "overlay"}},
      {"overlay", {"depth", "window", "D_range"}},
      {"fit", {"input", "column", "model", "window", "offset"}},
  };
  return s;
}

void check_keys(const json& obj, const std::string& section, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const auto& allowed = schema().at(section);
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    if (schema().count(key) && key != "") check_keys(value, key, where == "config" ? key : where + "." + key);
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

const json& section(const json& config, const char* name) {
  static const json empty = json::object();
  return config.contains(name) ? config.at(name) : empty;
}

const json& require(const json& config, const char* name) {
  if (!config.contains(name)) throw ConfigError(std::string("config needs a '") + name + "' section");
  return config.at(name);
}

Geometry make_geometry(const std::string& shape, double R, double L, double d) {
  Geometry g = shape == "cylinder"     ? Geometry::cylinder(R, L, d)
               : shape == "hemisphere" ? Geometry::hemisphere(R, d)
               : shape == "sphere"     ? Geometry::sphere(R, d)
                                       : throw ConfigError("unknown shape '" + shape + "'");
  g.validate();
  return g;
}

Geometry geometry_from(const json& config) {
  const json& g = require(config, "geometry");
  const std::string shape = get_or<std::string>(g, "shape", "cylinder");
  const double R = get_or<double>(g, "R", 0.0);
  return make_geometry(shape, R, get_or<double>(g, "L", R), get_or<double>(g, "d", 1.0));
}

PhysicalParams physics_from(const json& config) {
  const json& p = section(config, "physics");
  PhysicalParams out;
  out.D = get_or<double>(p, "D", out.D);
  out.J = get_or<double>(p, "J", out.J);
  out.gamma_e = get_or<double>(p, "gamma_e", out.gamma_e);
  out.p = get_or<double>(p, "p", out.p);
  out.validate();
  return out;
}

Truncation truncation_from(const json& config, const Geometry& g) {
  Truncation t = default_truncation(g);
  const json& s = section(config, "truncation");
  t.radial = get_or<int>(s, "radial", t.radial);
  t.second = get_or<int>(s, "second", t.second);
  t.azimuthal = get_or<int>(s, "azimuthal", t.azimuthal);
  return t;
}

// "10 tau_D", "0.1 tau_V", "3.5" (plain time units) or a bare number.
double parse_time(const json& v, double tau_D, double tau_V) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw ConfigError("time values must be numbers or strings like '10 tau_D'");
  std::istringstream in(v.get<std::string>());
  double x = 0.0;
  std::string unit;
  if (!(in >> x)) throw ConfigError("cannot parse time '" + v.get<std::string>() + "'");
  in >> unit;
  if (unit.empty()) return x;
  if (unit == "tau_D") return x * tau_D;
  if (unit == "tau_V") return x * tau_V;
  throw ConfigError("unknown time unit '" + unit + "'");
}

// Detunings: a bare number or "0.01 /tau_D".
double parse_rate(const json& v, double tau_D) {
  if (v.is_number()) return v.get<double>();
  std::istringstream in(v.get<std::string>());
  double x = 0.0;
  std::string unit;
  if (!(in >> x)) throw ConfigError("cannot parse rate '" + v.get<std::string>() + "'");
  in >> unit;
  if (unit.empty()) return x;
  if (unit == "/tau_D") return x / tau_D;
  throw ConfigError("unknown rate unit '" + unit + "'");
}

analysis::Window parse_window(const json& obj, const char* key, const char* lo, const char* hi, double tau_D,
                              double tau_V) {
  const json w = obj.contains(key) ? obj.at(key) : json::array({lo, hi});
  if (!w.is_array() || w.size() != 2) throw ConfigError(std::string(key) + " must be a two-element array");
  return {parse_time(w[0], tau_D, tau_V), parse_time(w[1], tau_D, tau_V)};
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream o(p);
  if (!o) throw ConfigError("cannot write " + p.string());
  o << std::setprecision(std::numeric_limits<double>::max_digits10);
  return o;
}

void write_json(const fs::path& p, const json& j) {
  auto o = open_out(p);
  o << j.dump(2) << '\n';
}

json fit_json(const std::optional<signal::FitResult>& f) {
  if (!f) return nullptr;
  return {{"model", signal::model_name(f->model)},
          {"params", f->params},
          {"window", {f->t_lo, f->t_hi}},
          {"residual_rms", f->residual_rms},
          {"points", f->points}};
}

// Cartesian sweep over the geometry block.
struct SweepPoint {
  Geometry g;
  int m;
};

std::vector<std::pair<std::optional<SweepPoint>, std::string>> sweep_points(const json& config, bool with_m) {
  const json& g = require(config, "geometry");
  const json& sw = section(config, "sweep");
  const std::string shape = get_or<std::string>(g, "shape", "cylinder");
  auto list = [&](const char* key, double fallback) {
    if (sw.contains(key)) return sw.at(key).get<std::vector<double>>();
    return std::vector<double>{get_or<double>(g, key, fallback)};
  };
  const auto Rs = list("R", 0.0);
  const auto Ls = sw.contains("L") || g.contains("L") ? list("L", 0.0) : Rs;
  const bool tie_L = !sw.contains("L") && !g.contains("L");
  const auto ds = list("d", 1.0);
  const auto ms = with_m ? get_or<std::vector<int>>(sw, "m", {0}) : std::vector<int>{0};
  std::vector<std::pair<std::optional<SweepPoint>, std::string>> out;
  for (std::size_t ri = 0; ri < Rs.size(); ++ri) {
    for (std::size_t li = 0; li < (tie_L ? 1 : Ls.size()); ++li) {
      const double L = tie_L ? Rs[ri] : Ls[li];
      for (double d : ds) {
        for (int m : ms) {
          std::ostringstream label;
          label << shape << ',' << Rs[ri] << ',' << L << ',' << d << ',' << m;
          try {
            if (m < -2 || m > 2) throw ConfigError("m must lie in -2..2");
            out.push_back({SweepPoint{make_geometry(shape, Rs[ri], L, d), m}, label.str()});
          } catch (const std::exception& e) {
            out.push_back({std::nullopt, label.str() + ": " + e.what()});
          }
        }
      }
    }
  }
  return out;
}

std::string csv_escape(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::vector<fs::path> cmd_table(const std::string& which, const json& config, const RunOptions& opt,
                                const Manifest& man) {
  const bool with_m = which != "meanfield";
  const PhysicalParams phys = physics_from(config);
  const fs::path path = opt.out_dir / (which + ".csv");
  auto o = open_out(path);
  o << man.csv_line();
  if (which == "meanfield") {
    o << "shape,R,L,d,I1,mean_field,status\n";
  } else {
    o << "shape,R,L,d,m,value,source,status\n";
  }
  for (const auto& [point, label] : sweep_points(config, with_m)) {
    if (!point) {
      const auto cut = label.find(": ");
      o << label.substr(0, cut) << (which == "meanfield" ? ",," : ",,,") << "error: "
        << csv_escape(label.substr(cut + 2)) << '\n';
      continue;
    }
    const Geometry& g = point->g;
    o << g.name() << ',' << g.radius() << ',' << (g.kind() == ShapeKind::cylinder ? g.height() : g.radius()) << ','
      << g.d << ',';
    try {
      if (which == "meanfield") {
        const double I1 = analytic::mean_field_integral(g);
        o << I1 << ',' << analytic::mean_field(g, phys) << ",ok\n";
      } else if (which == "brms") {
        const auto r = analytic::brms(g, point->m);
        o << point->m << ',' << r.value * phys.J * phys.J << ',' << r.formula_id << ",ok\n";
      } else {
        try {
          const auto r = analytic::long_time_constant(g, point->m);
          o << point->m << ',' << r.value * phys.J * phys.J << ',' << r.formula_id << ",ok\n";
        } catch (const NoClosedForm&) {
          const double v = analytic::long_time_numeric(g, point->m);
          o << point->m << ',' << v * phys.J * phys.J << ",numeric,no closed form\n";
        }
      }
    } catch (const std::exception& e) {
      o << (which == "meanfield" ? "," : std::to_string(point->m) + ",,") << ",error: " << csv_escape(e.what())
        << '\n';
    }
  }
  return {path};
}

std::vector<fs::path> cmd_corr(const json& config, const RunOptions& opt, const Manifest& man) {
  const Geometry g = geometry_from(config);
  const PhysicalParams phys = physics_from(config);
  const Truncation trunc = truncation_from(config, g);
  const json& c = section(config, "correlation");
  const int m = get_or<int>(c, "m", 0);
  const double tD = g.tau_D(phys.D), tV = g.tau_V(phys.D);
  const double t_min = c.contains("t_min") ? parse_time(c.at("t_min"), tD, tV) : 1e-3 * tD;
  const double t_max = c.contains("t_max") ? parse_time(c.at("t_max"), tD, tV) : 10.0 * tV;
  const auto times = log_grid(t_min, t_max, get_or<int>(c, "points", 200));
  const Exec exec = opt.deterministic ? Exec::serial : Exec::parallel;
  const auto ov = cached_overlaps(g, phys.D, m, trunc, get_or<double>(c, "rel_tol", 1e-5));
  const auto curve = correlation_normalized(g, phys.D, m, times, trunc, exec);

  const fs::path csv = opt.out_dir / "corr.csv";
  {
    auto o = open_out(csv);
    o << man.csv_line() << "t,C_tilde,C,convergence\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double full = (curve.values[i] * curve.brms2 + curve.c_inf) * phys.J * phys.J;
      o << times[i] << ',' << curve.values[i] << ',' << full << ',' << curve.convergence[i] << '\n';
    }
  }
  const auto fits = analysis::regime_fits(times, curve.values, parse_window(c, "short_window", "0.001 tau_D", "0.1 tau_D", tD, tV),
                                          parse_window(c, "power_window", "10 tau_D", "0.1 tau_V", tD, tV),
                                          parse_window(c, "long_window", "1 tau_V", "10 tau_V", tD, tV),
                                          slowest_rate(*ov));
  json report = {{"manifest", man.to_json()},
                 {"geometry", g.name()},
                 {"m", m},
                 {"tau_D", tD},
                 {"tau_V", tV},
                 {"brms2", curve.brms2 * phys.J * phys.J},
                 {"c_inf", curve.c_inf * phys.J * phys.J},
                 {"c_tilde_0_plus_plateau", curve.values.front() + curve.c_inf / curve.brms2},
                 {"short_time", fit_json(fits.short_time)},
                 {"intermediate", fit_json(fits.intermediate)},
                 {"long_time", fit_json(fits.long_time)},
                 {"slowest_rate", fits.slowest_rate},
                 {"long_time_rate", fits.long_time_rate},
                 {"slope_spread", fits.slope_spread},
                 {"power_law_decades", fits.power_law_decades},
                 {"intermediate_present", fits.intermediate_present},
                 {"note", fits.note}};
  const fs::path js = opt.out_dir / "corr_fits.json";
  write_json(js, report);
  return {csv, js};
}

Vec3 vec3(const json& v) {
  const auto a = v.get<std::vector<double>>();
  if (a.size() != 3) throw ConfigError("points must have three coordinates");
  return {a[0], a[1], a[2]};
}

std::vector<fs::path> cmd_propagator(const json& config, const RunOptions& opt, const Manifest& man) {
  const Geometry g = geometry_from(config);
  const PhysicalParams phys = physics_from(config);
  const Truncation trunc = truncation_from(config, g);
  const json& p = require(config, "propagator");
  const Vec3 r = vec3(p.at("r")), r0 = vec3(p.at("r0"));
  if (!g.contains(r) || !g.contains(r0)) throw ConfigError("propagator points must lie inside the container");
  const auto ms = enumerate_modes(g, phys.D, trunc);
  const fs::path path = opt.out_dir / "propagator.csv";
  auto o = open_out(path);
  o << man.csv_line() << "t,G,convergence\n";
  const Exec exec = opt.deterministic ? Exec::serial : Exec::parallel;
  for (const auto& tv : p.at("times")) {
    const double t = parse_time(tv, g.tau_D(phys.D), g.tau_V(phys.D));
    const auto v = propagator_eval(ms, r, r0, t, exec);
    o << t << ',' << v.value << ',' << v.convergence << '\n';
  }
  return {path};
}

md::MdConfig md_config_from(const json& config, std::uint64_t seed) {
  const json& m = require(config, "md");
  md::MdConfig c;
  const std::string shape = get_or<std::string>(m, "shape", "cylinder");
  const double R = get_or<double>(m, "R", 8.0);
  c.container = shape == "sphere" ? Geometry::sphere(R, 1.0) : Geometry::cylinder(R, get_or<double>(m, "L", R), 1.0);
  if (shape != "sphere" && shape != "cylinder") throw ConfigError("md shape must be cylinder or sphere");
  c.N = get_or<int>(m, "N", 0);
  c.depths = get_or<std::vector<double>>(m, "depths", {1.0});
  c.n_steps = get_or<std::int64_t>(m, "n_steps", 0);
  c.sample_stride = get_or<int>(m, "stride", c.sample_stride);
  c.wall = md::parse_wall_model(
      get_or<std::string>(m, "wall", shape == "sphere" ? "lj-everywhere" : "specular-caps"));
  c.dt = get_or<double>(m, "dt", c.dt);
  c.temperature = get_or<double>(m, "temperature", c.temperature);
  c.cutoff = get_or<double>(m, "cutoff", c.cutoff);
  c.friction = get_or<double>(m, "friction", c.friction);
  c.equilibration_time = get_or<double>(m, "equilibration_time", c.equilibration_time);
  c.skin = get_or<double>(m, "skin", c.skin);
  c.epsilon = get_or<double>(m, "epsilon", c.epsilon);
  c.sigma = get_or<double>(m, "sigma", c.sigma);
  c.mass = get_or<double>(m, "mass", c.mass);
  c.seed = seed;
  c.validate();
  return c;
}

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::vector<fs::path> cmd_md(const json& config, const RunOptions& opt, const Manifest& man) {
  const int runs = get_or<int>(require(config, "md"), "runs", 1);
  if (runs < 1) throw ConfigError("md runs must be at least 1");
  const Exec exec = opt.deterministic ? Exec::serial : Exec::parallel;
  std::vector<fs::path> files;
  json listing = json::array();
  json energies = json::array();
  std::uint64_t hash = 0;
  for (int r = 0; r < runs; ++r) {
    md::MdConfig c = md_config_from(config, man.seed + static_cast<std::uint64_t>(r));
    c.deterministic = opt.deterministic || c.deterministic;
    hash = md::config_hash(c);
    auto th = md::thermalize(c, exec);
    auto run = md::run_nve(th.state, c, exec);
    for (const auto& tr : run.traces) {
      std::ostringstream stem;
      stem << "md_run" << r << "_d" << tr.depth;
      const fs::path bin = opt.out_dir / (stem.str() + ".trace");
      const fs::path csv = opt.out_dir / (stem.str() + ".csv");
      md::write_trace(bin, tr);
      md::write_trace_csv(csv, tr, man.csv_line());
      files.push_back(bin);
      files.push_back(csv);
      listing.push_back({{"file", bin.filename().string()}, {"run", r}, {"seed", c.seed}, {"depth", tr.depth}});
    }
    energies.push_back({{"run", r},
                        {"drift_per_1e5_steps", run.drift_per_1e5},
                        {"overlap_warnings", run.overlap_warnings},
                        {"mean_temperature", pairwise_sum(run.temperature) / run.temperature.size()}});
  }
  const md::MdConfig c0 = md_config_from(config, man.seed);
  json j = {{"manifest", man.to_json()},
            {"md_config_hash", hex(hash)},
            {"shape", c0.container.name()},
            {"R", c0.container.radius()},
            {"L", c0.container.height()},
            {"traces", listing},
            {"runs", energies}};
  const fs::path mp = opt.out_dir / "md_manifest.json";
  write_json(mp, j);
  files.push_back(mp);
  return files;
}

// Relative inputs that do not exist from the working directory are looked up
// in the output directory, where cmd_md leaves them.
fs::path resolve_input(const fs::path& p, const RunOptions& opt) {
  if (p.is_relative() && !fs::exists(p) && fs::exists(opt.out_dir / p)) return opt.out_dir / p;
  return p;
}

std::vector<fs::path> cmd_analyze(const json& config, const RunOptions& opt, const Manifest& man) {
  const json& a = require(config, "analyze");
  std::vector<md::FieldTrace> traces;
  std::optional<std::uint64_t> expected;
  double R = 0.0, L = 0.0;
  std::string shape = "cylinder";
  if (a.contains("manifest")) {
    const fs::path mp = resolve_input(a.at("manifest").get<std::string>(), opt);
    std::ifstream in(mp);
    if (!in) throw ConfigError("cannot read " + mp.string());
    const json mj = json::parse(in);
    expected = std::stoull(mj.at("md_config_hash").get<std::string>(), nullptr, 16);
    R = mj.at("R").get<double>();
    L = mj.at("L").get<double>();
    shape = mj.at("shape").get<std::string>();
    for (const auto& t : mj.at("traces")) traces.push_back(md::read_trace(mp.parent_path() / t.at("file").get<std::string>()));
  }
  for (const auto& t : get_or<std::vector<std::string>>(a, "traces", {})) {
    traces.push_back(md::read_trace(resolve_input(t, opt)));
  }
  if (traces.empty()) throw ConfigError("analyze: no traces (give a manifest or a trace list)");
  if (config.contains("md")) {
    md::MdConfig c = md_config_from(config, traces.front().seed);
    const std::uint64_t h = md::config_hash(c);
    if (expected && *expected != h) throw ConfigError("analyze: md block does not match the trace manifest");
    expected = h;
    R = c.container.radius();
    L = c.container.height();
    shape = c.container.name();
  }
  for (const auto& t : traces) {
    if (!expected) expected = t.config_hash;
    if (t.config_hash != *expected) throw ConfigError("analyze: traces come from different configurations");
  }
  if (!(R > 0.0)) throw ConfigError("analyze: container radius unknown (no manifest or md block)");

  const double frac = get_or<double>(a, "max_lag_fraction", 0.5);
  const auto dw = get_or<std::vector<double>>(a, "d_over_R", {0.15, 0.5});
  if (dw.size() != 2) throw ConfigError("d_over_R must have two entries");
  const auto scan = analysis::depth_scan(traces, R, {dw[0], dw[1]}, frac);

  std::vector<fs::path> files;
  const fs::path summary = opt.out_dir / "analyze_summary.csv";
  {
    auto o = open_out(summary);
    o << man.csv_line() << "depth,d_over_R,C0,C0_spread,plateau,plateau_over_C0\n";
    for (const auto& r : scan.rows) {
      o << r.depth << ',' << r.depth / R << ',' << r.c0 << ',' << r.c0_spread << ',' << r.plateau << ',' << r.ratio
        << '\n';
    }
  }
  files.push_back(summary);
  std::map<double, std::vector<std::vector<double>>> by_depth;
  for (const auto& t : traces) by_depth[t.depth].push_back(t.values);
  for (std::size_t k = 0; k < scan.rows.size(); ++k) {
    const double depth = scan.rows[k].depth;
    std::ostringstream stem;
    stem << "_d" << depth << ".csv";
    const fs::path cp = opt.out_dir / ("analyze_corr" + stem.str());
    auto o = open_out(cp);
    o << man.csv_line() << "lag,C,spread\n";
    const auto& ac = scan.correlations[k];
    for (std::size_t i = 0; i < ac.values.size(); ++i) o << ac.lags[i] << ',' << ac.values[i] << ',' << ac.spread[i] << '\n';
    files.push_back(cp);
    const auto sp = signal::power_spectrum(by_depth[depth], traces.front().dt);
    const fs::path spp = opt.out_dir / ("analyze_spectrum" + stem.str());
    auto so = open_out(spp);
    so << man.csv_line() << "omega,S\n";
    for (std::size_t i = 0; i < sp.omega.size(); ++i) {
      if (sp.omega[i] >= 0.0) so << sp.omega[i] << ',' << sp.power[i] << '\n';
    }
    files.push_back(spp);
  }
  json report = {{"manifest", man.to_json()},
                 {"brms2_slope", scan.brms_slope.params[0]},
                 {"brms2_fit", fit_json(scan.brms_slope)},
                 {"plateau_ratio_increasing", scan.ratio_increasing},
                 {"runs_per_depth", by_depth.begin()->second.size()}};
  if (a.contains("overlay")) {
    const json& ovc = a.at("overlay");
    const double depth = ovc.at("depth").get<double>();
    std::size_t k = 0;
    while (k < scan.rows.size() && scan.rows[k].depth != depth) ++k;
    if (k == scan.rows.size()) throw ConfigError("overlay depth not among the trace depths");
    const auto w = get_or<std::vector<double>>(ovc, "window", {0.05, 3.0});
    const auto Dr = get_or<std::vector<double>>(ovc, "D_range", {0.005, 1.0});
    const Geometry g = shape == "sphere" ? Geometry::sphere(R, depth) : Geometry::cylinder(R, L, depth);
    analysis::Overlay ov;
    try {
      ov = analysis::overlay(scan.correlations[k], g, default_truncation(g), {w.at(0), w.at(1)}, Dr.at(0), Dr.at(1));
    } catch (const FitDomainError& e) {
      std::cerr << "nanonmr analyze: " << e.what() << '\n';
      report["overlay"] = {{"depth", depth}, {"error", e.what()}};
      const fs::path rp = opt.out_dir / "analyze_report.json";
      write_json(rp, report);
      files.push_back(rp);
      return files;
    }
    report["overlay"] = {{"depth", depth},          {"D", ov.D},
                         {"scale", ov.scale},       {"relative_rms", ov.rel_rms},
                         {"tau_V", ov.tau_V},       {"window", {ov.window.lo, ov.window.hi}},
                         {"points", ov.t.size()}};
    const fs::path op = opt.out_dir / "analyze_overlay.csv";
    auto o = open_out(op);
    o << man.csv_line() << "t,md_rescaled,analytic\n";
    for (std::size_t i = 0; i < ov.t.size(); ++i) o << ov.t[i] << ',' << ov.md[i] << ',' << ov.analytic[i] << '\n';
    files.push_back(op);
  }
  const fs::path rp = opt.out_dir / "analyze_report.json";
  write_json(rp, report);
  files.push_back(rp);
  return files;
}

std::vector<fs::path> cmd_fisher(const json& config, const RunOptions& opt, const Manifest& man) {
  const Geometry g = geometry_from(config);
  const PhysicalParams phys = physics_from(config);
  const json& p = require(config, "protocol");
  const double tD = g.tau_D(phys.D), tV = g.tau_V(phys.D);
  const double delta = parse_rate(p.at("delta"), tD);
  const double tau = parse_time(p.at("tau"), tD, tV);
  const double T = parse_time(p.at("T"), tD, tV);
  const double T_m = parse_time(p.at("T_m"), tD, tV);
  const double dead = p.contains("dead_time") ? parse_time(p.at("dead_time"), tD, tV) : 0.0;
  const double V = g.volume();
  const double d3V = get_or<double>(p, "d3_over_V", g.d * g.d * g.d / V);
  const double B = phys.J * std::sqrt(analytic::brms(g, 0).value);

  const auto ucl = protocol::fisher_ucl(B, delta, tau, tD, phys.gamma_e, T);
  const auto conf = protocol::fisher_confined(B, tau, d3V, T_m, T, phys.gamma_e);
  const double x = delta * tD;
  const double enhancement = T_m / tD / (x * x) * d3V * d3V;

  const fs::path path = opt.out_dir / "fisher.csv";
  auto o = open_out(path);
  o << man.csv_line() << "quantity,t,information,cramer_rao,status\n";
  o << "ucl,," << ucl.information << ',' << ucl.cramer_rao << ",ok\n";
  o << "confined,," << conf.information << ',' << conf.cramer_rao << ",ok\n";
  o << "enhancement_ratio,," << enhancement << ",,ok\n";
  o << "confined_over_ucl,," << conf.information / ucl.information << ",,ok\n";

  const bool need_curve = p.contains("t") || get_or<bool>(p, "qdyne", false);
  if (need_curve) {
    const Truncation trunc = truncation_from(config, g);
    const auto times = log_grid(1e-3 * tD, 10.0 * tV, 200);
    const auto curve = correlation_full(g, phys.D, 0, times, trunc);
    auto C = [&](double t) {
      return phys.J * phys.J * (t <= 0.0 ? curve.brms2 : protocol::interpolate_loglinear(times, curve.values, t));
    };
    for (const auto& tv : get_or<json>(p, "t", json::array())) {
      const double t = parse_time(tv, tD, tV);
      try {
        const auto f = protocol::fisher_corr_spec(C(t), B, delta, t, tau, phys.gamma_e, T, dead);
        o << "corr_spec," << t << ',' << f.information << ',' << f.cramer_rao << ",ok\n";
      } catch (const std::exception& e) {
        o << "corr_spec," << t << ",,,error: " << csv_escape(e.what()) << '\n';
      }
    }
    if (get_or<bool>(p, "qdyne", false)) {
      const auto q = protocol::fisher_qdyne(C, phys.J * phys.J * curve.c_inf, delta, tau, phys.gamma_e, T, phys.J, V);
      o << "qdyne_exact,," << q.exact.information << ',' << q.exact.cramer_rao << ",ok\n";
      o << "qdyne_discrete_bound,," << q.discrete_bound << ",,ok\n";
      o << "qdyne_closed_bound,," << q.closed_bound << ",,ok\n";
    }
  }
  return {path};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<fs::path> cmd_fit(const json& config, const RunOptions& opt, const Manifest& man) {
  const json& f = require(config, "fit");
  const fs::path input = resolve_input(f.at("input").get<std::string>(), opt);
  std::ifstream in(input);
  if (!in) throw ConfigError("cannot read " + input.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<double> t, y;
  const std::string column = get_or<std::string>(f, "column", "");
  std::size_t col = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (header.empty()) {
      header = cells;
      if (!column.empty()) {
        const auto it = std::find(header.begin(), header.end(), column);
        if (it == header.end()) throw ConfigError("column '" + column + "' not in " + input.string());
        col = static_cast<std::size_t>(it - header.begin());
      }
      continue;
    }
    if (cells.size() <= col) continue;
    t.push_back(std::stod(cells[0]));
    y.push_back(std::stod(cells[col]));
  }
  const std::string model_s = get_or<std::string>(f, "model", "power-law");
  const signal::FitModel model = model_s == "exponential"     ? signal::FitModel::exponential
                                 : model_s == "power-law"     ? signal::FitModel::power_law
                                 : model_s == "loglog-linear" ? signal::FitModel::loglog_linear
                                                              : throw ConfigError("unknown fit model " + model_s);
  const auto w = f.at("window").get<std::vector<double>>();
  if (w.size() != 2) throw ConfigError("fit window must have two entries");
  std::optional<double> offset;
  if (f.contains("offset")) offset = f.at("offset").get<double>();
  const auto r = signal::fit(model, t, y, w[0], w[1], offset);
  const fs::path path = opt.out_dir / "fit.json";
  write_json(path, {{"manifest", man.to_json()}, {"input", input.string()}, {"fit", fit_json(r)}});
  return {path};
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"brms", "meanfield", "asymptote", "corr",   "propagator",
                                             "md",   "analyze",   "fisher",    "fit"};
  return s;
}

void validate_config(const json& config) { check_keys(config, "", "config"); }

json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  validate_config(j);
  return j;
}

fs::path preset_dir() { return NANONMR_PRESET_DIR; }

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  if (fs::is_directory(preset_dir())) {
    for (const auto& e : fs::directory_iterator(preset_dir())) {
      if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

json load_preset(const std::string& name) {
  const fs::path p = preset_dir() / (name + ".json");
  if (!fs::exists(p)) throw ConfigError("unknown preset '" + name + "'");
  return load_config(p);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json Manifest::to_json() const {
  return {{"tool", "nanonmr"},
          {"version", kVersion},
          {"subcommand", subcommand},
          {"config_hash", hex(config_hash)},
          {"seed", seed},
          {"deterministic", deterministic}};
}

std::string Manifest::csv_line() const { return "# manifest " + to_json().dump() + "\n"; }

Manifest make_manifest(const std::string& subcommand, const json& config, const RunOptions& opt) {
  Manifest m;
  m.subcommand = subcommand;
  m.seed = opt.seed.value_or(get_or<std::uint64_t>(config, "seed", 1));
  json effective = config;
  effective["seed"] = m.seed;
  effective["subcommand"] = subcommand;
  m.config_hash = fnv1a(effective.dump());
  m.deterministic = opt.deterministic;
  return m;
}

std::vector<fs::path> run(const std::string& subcommand, json config, const RunOptions& opt) {
  validate_config(config);
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  if (opt.threads > 0) set_thread_count(opt.threads);
  fs::create_directories(opt.out_dir);
  const Manifest man = make_manifest(subcommand, config, opt);
  if (subcommand == "brms" || subcommand == "meanfield" || subcommand == "asymptote") {
    return cmd_table(subcommand, config, opt, man);
  }
  if (subcommand == "corr") return cmd_corr(config, opt, man);
  if (subcommand == "propagator") return cmd_propagator(config, opt, man);
  if (subcommand == "md") return cmd_md(config, opt, man);
  if (subcommand == "analyze") return cmd_analyze(config, opt, man);
  if (subcommand == "fisher") return cmd_fisher(config, opt, man);
  return cmd_fit(config, opt, man);
}

json read_csv_manifest(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# manifest ", 0) != 0) {
    throw ConfigError(path.string() + " has no manifest line");
  }
  return json::parse(line.substr(11));
}

}  // namespace nanonmr::cli
