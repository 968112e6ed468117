#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "epdyn/analysis.hpp"
#include "epdyn/bathsim.hpp"
#include "epdyn/chains.hpp"
#include "epdyn/config.hpp"
#include "epdyn/errors.hpp"
#include "epdyn/heisenberg.hpp"
#include "epdyn/io.hpp"
#include "epdyn/lindblad.hpp"
#include "epdyn/linalg.hpp"
#include "epdyn/model.hpp"
#include "epdyn/version.hpp"

namespace epd::cli {

using io::json;

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalError = 3 };

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"spectrum", "dynamics", "sweep", "mpemba", "chain"};
  return c;
}

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::vector<std::string>> formats;
  bool with_me = false;
  bool with_oracle = false;
  unsigned threads = 1;
};

struct OutputFile {
  std::string name;
  std::string content;
};

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  std::string version = kVersion;
  json settings = json::object();
  std::optional<std::string> error;

  json to_json() const {
    json j;
    j["command"] = command;
    j["version"] = version;
    j["status"] = error ? "error" : "ok";
    j["config"] = json(config);
    j["settings"] = settings;
    j["outputs"] = outputs;
    j["duration_seconds"] = duration_seconds;
    if (error) j["error"] = {{"message", *error}};
    return j;
  }
};

/// Evaluates f(i) for i in [0, n) on up to `threads` workers; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) out[i] = f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

class Outputs {
 public:
  explicit Outputs(std::vector<std::string> formats) : formats_(std::move(formats)) {}
  bool wants(const std::string& f) const { return std::find(formats_.begin(), formats_.end(), f) != formats_.end(); }
  void add(std::string name, std::string content) { files_.push_back({std::move(name), std::move(content)}); }
  const std::vector<OutputFile>& files() const { return files_; }

 private:
  std::vector<std::string> formats_;
  std::vector<OutputFile> files_;
};

namespace detail {

inline void require_double_dot(const config::RunConfig& cfg, const std::string& cmd) {
  if (cfg.params.n_dots != 2) throw ConfigError(cmd + ": double dot required (n_dots = 2)");
}

inline json vector_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(io::real_or_null(x));
  return a;
}

inline std::vector<cplx> to_std(const ComplexVector& v) { return {v.data(), v.data() + v.size()}; }

inline json series_json(const TimeSeries& ts) {
  json j;
  j["provenance"] = ts.provenance;
  j["t"] = vector_json(ts.t);
  for (std::size_t c = 0; c < ts.names.size(); ++c) j[ts.names[c]] = vector_json(ts.channels[c]);
  if (!ts.metadata.empty()) j["metadata"] = json(ts.metadata);
  return j;
}

}  // namespace detail

inline void cmd_spectrum(const config::RunConfig& cfg, const Options&, Outputs& out, RunManifest&) {
  const auto& p = cfg.params;
  const ComplexMatrix a = chains::build_chain_A(p);
  const auto he_vals = detail::to_std(linalg::sorted_eigenvalues(Eigen::ComplexEigenSolver<ComplexMatrix>(a, false).eigenvalues()));
  json j;
  j["n_dots"] = p.n_dots;
  j["he_eigenvalues"] = io::complex_array(he_vals);
  j["he_defective"] = linalg::jordan_structure(a).defective();
  if (p.n_dots == 2) {
    j["g_ep"] = he::g_ep(p.gamma[0], p.gamma[1]);
    if (p.is_resonant()) {
      const auto e = he::eta_he(p);
      j["eta_squared"] = e.eta_squared;
      j["eta"] = io::complex_json(e.eta);
      j["regime"] = he::to_string(he::classify(p).regime);
    } else {
      j["regime"] = "detuned";
    }
  } else if (chains::is_alternating(p)) {
    const auto cf = chains::closed_form_spectrum(p);
    j["eta_squared"] = cf.eta_squared;
    j["eta"] = io::complex_array(cf.eta_values);
    j["ep_couplings"] = cf.ep_couplings;
  }
  std::vector<cplx> me_vals;
  if (p.n_dots <= 3) {
    const auto l = me::build_liouvillian(p, cfg.reservoirs);
    me_vals = detail::to_std(linalg::sorted_eigenvalues(me::liouvillian_spectrum(l).eigenvalues));
    j["me_eigenvalues"] = io::complex_array(me_vals);
    j["me_half_rate_block"] = me::half_rate_block(l, p.total_gamma());
    if (p.n_dots == 2) j["me_defective"] = me::half_rate_defective(l, p.total_gamma());
    if (p.n_dots == 2 && p.is_resonant()) {
      const double e2 = me::extract_eta_squared_me(l, p.total_gamma());
      j["eta_squared_me"] = e2;
      j["eta_me"] = io::complex_json(me::extract_eta_me(l, p.total_gamma()));
    }
  }
  if (out.wants("json")) out.add("spectrum.json", io::dump(j));
  if (out.wants("csv")) {
    io::CsvTable t;
    t.header = {"source", "index", "re_lambda", "im_lambda"};
    for (std::size_t k = 0; k < he_vals.size(); ++k)
      t.add_row({"HE", std::to_string(k), io::num(he_vals[k].real()), io::num(he_vals[k].imag())});
    for (std::size_t k = 0; k < me_vals.size(); ++k)
      t.add_row({"ME", std::to_string(k), io::num(me_vals[k].real()), io::num(me_vals[k].imag())});
    out.add("spectrum.csv", t.str());
  }
}

inline void cmd_dynamics(const config::RunConfig& cfg, const Options& opt, Outputs& out, RunManifest& manifest) {
  detail::require_double_dot(cfg, "dynamics");
  const auto& p = cfg.params;
  validate_initial(cfg.initial, 2);
  const he::PopulationSolver solver(p, cfg.reservoirs, cfg.quadrature);
  const auto times = cfg.grid.times();
  const auto pops = parallel_map<std::vector<double>>(times.size(), opt.threads, [&](std::size_t i) {
    return solver.populations(cfg.initial, times[i] - cfg.grid.t0);
  });
  std::vector<double> ss{std::nan(""), std::nan("")};
  if (solver.has_steady_state()) ss = solver.steady_state();

  TimeSeries he_ts;
  he_ts.t = times;
  he_ts.provenance = "HE";
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> v(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) v[i] = pops[i][j];
    he_ts.add_channel("N" + std::to_string(j + 1), std::move(v));
  }
  double he_min = INFINITY, he_max = -INFINITY;
  for (const auto& c : he_ts.channels)
    for (double x : c) {
      he_min = std::min(he_min, x);
      he_max = std::max(he_max, x);
    }
  if (he_min < -1e-6 || he_max > 1.0 + 1e-6)
    throw NumericalError("HE populations left [0,1]: range [" + io::num(he_min) + ", " + io::num(he_max) + "]");

  std::optional<TimeSeries> me_ts, oracle_ts;
  json j;
  if (opt.with_me) {
    const auto ev = me::evolve(me::build_liouvillian(p, cfg.reservoirs), me::product_state(cfg.initial.n), cfg.grid);
    me_ts = me::me_populations(ev, 2);
    j["me_invariants"] = {{"max_trace_deviation", ev.max_trace_deviation},
                          {"max_hermiticity", ev.max_hermiticity},
                          {"min_eigenvalue", ev.min_eigenvalue}};
  }
  if (opt.with_oracle) {
    oracle_ts = bath::oracle_dot_populations(p, cfg.reservoirs, cfg.initial, cfg.grid,
                                             {cfg.oracle.modes, cfg.oracle.half_width});
    for (const auto& c : oracle_ts->channels)
      for (double x : c)
        if (x < -1e-6 || x > 1.0 + 1e-6) throw NumericalError("oracle populations left [0,1]");
    manifest.settings["oracle"] = json(oracle_ts->metadata);
  }

  if (out.wants("csv")) {
    io::CsvTable t;
    t.header = {"t", "N1_HE", "N2_HE"};
    if (me_ts) t.header.insert(t.header.end(), {"N1_ME", "N2_ME"});
    if (oracle_ts) t.header.insert(t.header.end(), {"N1_oracle", "N2_oracle"});
    t.header.insert(t.header.end(), {"N1_ss", "N2_ss"});
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::vector<std::string> row{io::num(times[i]), io::num(pops[i][0]), io::num(pops[i][1])};
      for (const auto* ts : {me_ts ? &*me_ts : nullptr, oracle_ts ? &*oracle_ts : nullptr})
        if (ts) {
          row.push_back(io::num(ts->channels[0][i]));
          row.push_back(io::num(ts->channels[1][i]));
        }
      row.push_back(io::num(ss[0]));
      row.push_back(io::num(ss[1]));
      t.add_row(std::move(row));
    }
    out.add("dynamics.csv", t.str());
  }
  if (out.wants("json")) {
    if (p.is_resonant()) {
      j["regime"] = he::to_string(he::classify(p).regime);
      j["eta_squared"] = he::eta_he(p).eta_squared;
    } else {
      j["regime"] = "detuned";
    }
    j["steady_state"] = detail::vector_json(ss);
    j["he"] = detail::series_json(he_ts);
    if (me_ts) j["me"] = detail::series_json(*me_ts);
    if (oracle_ts) j["oracle"] = detail::series_json(*oracle_ts);
    out.add("dynamics.json", io::dump(j));
  }
  if (out.wants("svg")) {
    io::LinePlot plot;
    plot.title = "Normalized populations";
    plot.x_label = "t (1/T1)";
    plot.y_label = "<N_j(t)> / <N_j>_ss";
    auto add = [&](const TimeSeries& ts, const std::string& tag, bool dashed) {
      for (std::size_t c = 0; c < 2; ++c) {
        std::vector<double> y = ts.channels[c];
        for (double& x : y) x /= ss[c];
        plot.series.push_back({ts.names[c] + " " + tag, ts.t, y, io::palette()[c], dashed});
      }
    };
    add(he_ts, "HE", false);
    if (me_ts) add(*me_ts, "ME", true);
    if (oracle_ts) {
      add(*oracle_ts, "oracle", true);
      for (std::size_t k = plot.series.size() - 2; k < plot.series.size(); ++k) plot.series[k].color = io::palette()[k % 2 + 2];
    }
    plot.guide_lines = {1.0};
    out.add("dynamics.svg", io::render_svg(plot));
  }
}

inline void cmd_sweep(const config::RunConfig& cfg, const Options&, Outputs& out, RunManifest&) {
  detail::require_double_dot(cfg, "sweep");
  const auto& sw = cfg.sweep;
  const double gep = he::g_ep(cfg.params.gamma[0], cfg.params.gamma[1]);
  double g_max = sw.g_max;
  if (g_max == 0.0) g_max = gep > 0.0 ? 2.0 * gep : 1.0;
  if (sw.detuning_points > 2000 || sw.g_points > 2000) throw ConfigError("sweep resolution above 2000 points per axis");
  if (sw.detuning_points > 1 && !(sw.detuning_max > sw.detuning_min)) throw ConfigError("sweep: detuning_max must exceed detuning_min");
  if (sw.g_points > 1 && !(g_max > sw.g_min)) throw ConfigError("sweep: g_max must exceed g_min");
  const auto grid = analysis::riemann_sweep(cfg.params, {sw.detuning_min, sw.detuning_max}, {sw.g_min, g_max},
                                            {sw.detuning_points, sw.g_points});
  std::size_t defective = 0;
  json cells = json::array();
  for (const auto& c : grid.cells)
    if (c.defective) {
      ++defective;
      cells.push_back({{"detuning", c.detuning}, {"g", c.g}});
    }
  if (out.wants("csv")) {
    io::CsvTable t;
    t.header = {"detuning", "g", "re_l1", "im_l1", "re_l2", "im_l2", "defective"};
    for (const auto& c : grid.cells)
      t.add_row({io::num(c.detuning), io::num(c.g), io::num(c.lambda_plus.real()), io::num(c.lambda_plus.imag()),
                 io::num(c.lambda_minus.real()), io::num(c.lambda_minus.imag()), c.defective ? "1" : "0"});
    out.add("sweep.csv", t.str());
  }
  if (out.wants("json")) {
    json j;
    j["detuning_points"] = grid.detunings.size();
    j["g_points"] = grid.couplings.size();
    j["g_ep"] = gep;
    j["defective_cells"] = defective;
    j["defective"] = cells;
    out.add("sweep.json", io::dump(j));
  }
  if (out.wants("svg")) {
    std::size_t id = 0;
    for (std::size_t k = 0; k < grid.detunings.size(); ++k)
      if (std::abs(grid.detunings[k]) < std::abs(grid.detunings[id])) id = k;
    io::LinePlot plot;
    plot.title = "Eigenvalues of A at detuning " + io::short_num(grid.detunings[id]);
    plot.x_label = "g (T1)";
    plot.y_label = "Re lambda, Im lambda + eps (T1)";
    std::vector<double> r1, r2, i1, i2;
    const double centre = 0.5 * (cfg.params.eps[0] + cfg.params.eps[1]);
    for (std::size_t ig = 0; ig < grid.couplings.size(); ++ig) {
      const auto& c = grid.at(ig, id);
      r1.push_back(c.lambda_plus.real());
      r2.push_back(c.lambda_minus.real());
      i1.push_back(c.lambda_plus.imag() + centre);
      i2.push_back(c.lambda_minus.imag() + centre);
    }
    plot.series = {{"Re l1", grid.couplings, r1, io::palette()[0], false},
                   {"Re l2", grid.couplings, r2, io::palette()[1], false},
                   {"Im l1", grid.couplings, i1, io::palette()[0], true},
                   {"Im l2", grid.couplings, i2, io::palette()[1], true}};
    out.add("sweep.svg", io::render_svg(plot));
  }
}

inline void cmd_mpemba(const config::RunConfig& cfg, const Options&, Outputs& out, RunManifest& manifest) {
  detail::require_double_dot(cfg, "mpemba");
  const auto& m = cfg.mpemba;
  ChainParams pe = cfg.params, po = cfg.params;
  pe.g = m.g_ep.value_or(he::g_ep(cfg.params.gamma[0], cfg.params.gamma[1]));
  po.g = m.g_over > 0.0 ? m.g_over : pe.g / 2.0;
  const InitialConditions ne{m.n_ep}, no{m.n_over};
  validate_initial(ne, 2);
  validate_initial(no, 2);
  analysis::MpembaOptions mo;
  mo.check_regimes = !(pe.g == po.g);
  const auto rep = analysis::mpemba_ratio(pe, po, cfg.reservoirs, ne, no, cfg.grid, mo, cfg.quadrature);
  manifest.settings["mpemba"] = {{"g_ep", pe.g}, {"g_over", po.g}, {"n_ep", m.n_ep}, {"n_over", m.n_over}};

  if (out.wants("csv")) {
    io::CsvTable t;
    t.header = {"t", "R1", "R2", "chi_EP_1", "chi_over_1", "chi_EP_2", "chi_over_2"};
    for (std::size_t i = 0; i < rep.t.size(); ++i)
      t.add_row({io::num(rep.t[i]), io::num(rep.channels[0].ratio[i]), io::num(rep.channels[1].ratio[i]),
                 io::num(rep.channels[0].chi_ep[i]), io::num(rep.channels[0].chi_over[i]),
                 io::num(rep.channels[1].chi_ep[i]), io::num(rep.channels[1].chi_over[i])});
    out.add("mpemba.csv", t.str());
  }
  if (out.wants("json")) {
    json j;
    j["g_ep"] = pe.g;
    j["g_over"] = po.g;
    j["eta_over"] = rep.eta_over;
    json ch = json::array();
    for (std::size_t k = 0; k < rep.channels.size(); ++k) {
      const auto& c = rep.channels[k];
      json e;
      e["dot"] = k + 1;
      e["initial_ratio"] = io::real_or_null(c.initial);
      e["crossing_time"] = c.crossing ? json(*c.crossing) : json(nullptr);
      e["masked_points"] = c.masked.size();
      e["target_slope"] = c.target_slope;
      if (c.fit) {
        e["fit"] = {{"slope", c.fit->slope}, {"intercept", c.fit->intercept}, {"residual", c.fit->residual},
                    {"points", c.fit->points}, {"t_start", c.fit_start}, {"relative_error", c.slope_error()}};
      } else {
        e["fit"] = nullptr;
      }
      ch.push_back(e);
    }
    j["channels"] = ch;
    j["t"] = detail::vector_json(rep.t);
    j["R1"] = detail::vector_json(rep.channels[0].ratio);
    j["R2"] = detail::vector_json(rep.channels[1].ratio);
    out.add("mpemba.json", io::dump(j));
  }
  if (out.wants("svg")) {
    io::LinePlot plot;
    plot.title = "Mpemba ratio";
    plot.x_label = "t (1/T1)";
    plot.y_label = "R_j(t)";
    plot.series = {{"R1", rep.t, rep.channels[0].ratio, io::palette()[0], false},
                   {"R2", rep.t, rep.channels[1].ratio, io::palette()[1], false}};
    plot.guide_lines = {1.0};
    out.add("mpemba.svg", io::render_svg(plot));
  }
}

inline void cmd_chain(const config::RunConfig& cfg, const Options&, Outputs& out, RunManifest&) {
  const auto& p = cfg.params;
  const auto cf = chains::closed_form_spectrum(p);
  const ComplexVector num =
      linalg::sorted_eigenvalues(Eigen::ComplexEigenSolver<ComplexMatrix>(chains::build_chain_A(p), false).eigenvalues());
  const auto match = me::contains(num, cf.eigenvalues, std::numeric_limits<double>::infinity());
  json j;
  j["n_dots"] = p.n_dots;
  j["closed_form"] = io::complex_array(cf.eigenvalues);
  j["numerical"] = io::complex_array(match.nearest);
  j["max_deviation"] = match.max_distance;
  j["eta_squared"] = cf.eta_squared;
  json eps = json::array();
  for (const auto& e : chains::ep_couplings(p.n_dots, p.gamma[0], p.gamma[1]))
    eps.push_back({{"g", e.g}, {"block_size", e.block_size}});
  j["ep_couplings"] = eps;
  if (p.n_dots == 3) {
    const auto r = chains::three_dot_liouvillian_check(p.gamma[0], p.gamma[1], p.g, p.eps[0], cfg.reservoirs);
    j["three_dot"] = {{"expected", io::complex_array(r.expected)},
                      {"nearest", io::complex_array(r.nearest)},
                      {"max_distance", r.max_distance},
                      {"tolerance", r.tolerance},
                      {"contained", r.contained},
                      {"eta3_squared", r.eta3_squared},
                      {"he_defective", r.he_defective},
                      {"me_defective", r.me_defective}};
  }
  if (out.wants("json")) out.add("chain.json", io::dump(j));
  if (out.wants("csv")) {
    io::CsvTable t;
    t.header = {"index"};
    io::complex_columns(t.header, "closed");
    io::complex_columns(t.header, "numerical");
    for (std::size_t k = 0; k < cf.eigenvalues.size(); ++k) {
      std::vector<std::string> row{std::to_string(k)};
      io::complex_cells(row, cf.eigenvalues[k]);
      io::complex_cells(row, match.nearest[k]);
      t.add_row(std::move(row));
    }
    out.add("chain.csv", t.str());
  }
}

/// Runs one command. Config errors leave no files behind; numerical failures
/// still produce manifest.json with an error section.
inline int run(const Options& opt, std::ostream& err = std::cerr) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.command = opt.command;
  config::RunConfig cfg;
  std::filesystem::path dir;
  try {
    if (std::find(commands().begin(), commands().end(), opt.command) == commands().end())
      throw ConfigError("unknown command '" + opt.command + "'");
    if (opt.threads == 0) throw ConfigError("--threads must be positive");
    cfg = config::load(opt.config_path);
    if (opt.out) cfg.output_directory = *opt.out;
    if (opt.formats) {
      for (const auto& f : *opt.formats)
        if (f != "csv" && f != "json" && f != "svg") throw ConfigError("unknown output format '" + f + "'");
      cfg.formats = *opt.formats;
    }
    dir = cfg.output_directory;
    manifest.config = cfg.snapshot;
    manifest.settings["quadrature"] = {{"abs_tol", cfg.quadrature.abs_tol},
                                       {"window_factor", cfg.quadrature.window_factor}};
    manifest.settings["formats"] = cfg.formats;
    manifest.settings["with_me"] = opt.with_me;
    manifest.settings["with_oracle"] = opt.with_oracle;
    manifest.settings["threads"] = opt.threads;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  Outputs out(cfg.formats);
  int code = kOk;
  try {
    if (opt.command == "spectrum") cmd_spectrum(cfg, opt, out, manifest);
    else if (opt.command == "dynamics") cmd_dynamics(cfg, opt, out, manifest);
    else if (opt.command == "sweep") cmd_sweep(cfg, opt, out, manifest);
    else if (opt.command == "mpemba") cmd_mpemba(cfg, opt, out, manifest);
    else cmd_chain(cfg, opt, out, manifest);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    manifest.error = e.what();
    code = kNumericalError;
  }

  try {
    std::filesystem::create_directories(dir);
    if (code == kOk)
      for (const auto& f : out.files()) {
        io::write_text(dir / f.name, f.content);
        manifest.outputs.push_back(f.name);
      }
  } catch (const std::exception& e) {
    err << "output failure: " << e.what() << "\n";
    manifest.error = e.what();
    code = kNumericalError;
  }
  manifest.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    io::write_text(dir / "manifest.json", io::dump(manifest.to_json()));
  } catch (const std::exception& e) {
    err << "manifest failure: " << e.what() << "\n";
    code = kNumericalError;
  }
  return code;
}

}  // namespace epd::cli
