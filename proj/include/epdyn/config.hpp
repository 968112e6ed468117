#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"
#include "epdyn/heisenberg.hpp"
#include "epdyn/model.hpp"

// INI run configuration. Lists are comma separated; a single value in a
// per-reservoir list is broadcast to every dot.
//
//   [system]      n_dots, eps, g, gamma
//   [reservoirs]  T, mu, occupation (optional), zero_temperature (optional)
//   [initial]     n
//   [simulation]  t0, t_end, steps
//   [quadrature]  abs_tol, window_factor
//   [output]      directory, formats
//   [mpemba]      g_ep, g_over, n_ep, n_over
//   [sweep]       detuning_min, detuning_max, detuning_points, g_min, g_max, g_points
//   [oracle]      modes, half_width

namespace epd::config {

struct SweepSettings {
  double detuning_min = -1.0, detuning_max = 1.0;
  std::size_t detuning_points = 101;
  double g_min = 0.0, g_max = 0.0;  // g_max = 0 -> 2 g_EP
  std::size_t g_points = 101;
};

struct MpembaSettings {
  std::optional<double> g_ep;  // default |G1 - G2| / 4
  double g_over = 0.0;         // default g_ep / 2
  std::vector<double> n_ep{1.0, 1.0};
  std::vector<double> n_over{0.5, 0.5};
};

struct OracleConfig {
  std::size_t modes = 3000;
  double half_width = 0.0;
};

struct RunConfig {
  ChainParams params;
  std::vector<ReservoirSpec> reservoirs;
  InitialConditions initial;
  TimeGrid grid{0.0, 1.0, 2};
  he::QuadratureSettings quadrature;
  std::string output_directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  MpembaSettings mpemba;
  SweepSettings sweep;
  OracleConfig oracle;
  std::map<std::string, std::string> snapshot;  // "section.key" -> raw text
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"system", {"n_dots", "eps", "g", "gamma"}},
      {"reservoirs", {"T", "mu", "occupation", "zero_temperature"}},
      {"initial", {"n"}},
      {"simulation", {"t0", "t_end", "steps"}},
      {"quadrature", {"abs_tol", "window_factor"}},
      {"output", {"directory", "formats"}},
      {"mpemba", {"g_ep", "g_over", "n_ep", "n_over"}},
      {"sweep", {"detuning_min", "detuning_max", "detuning_points", "g_min", "g_max", "g_points"}},
      {"oracle", {"modes", "half_width"}},
  };
  return s;
}

namespace detail {

class Reader {
 public:
  explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  double number(const std::string& section, const std::string& key, std::optional<double> fallback = {}) {
    const auto r = raw(section, key);
    if (!r) {
      if (!fallback) issues.push_back("missing " + section + "." + key);
      return fallback.value_or(0.0);
    }
    return parse_double(section + "." + key, *r);
  }

  std::size_t count(const std::string& section, const std::string& key, std::optional<std::size_t> fallback = {}) {
    const auto r = raw(section, key);
    if (!r) {
      if (!fallback) issues.push_back("missing " + section + "." + key);
      return fallback.value_or(0);
    }
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(*r, &pos);
      if (pos != r->size() || v < 0) throw std::invalid_argument(*r);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      issues.push_back(section + "." + key + ": expected a non-negative integer, got '" + *r + "'");
      return fallback.value_or(0);
    }
  }

  std::vector<double> numbers(const std::string& section, const std::string& key,
                              std::optional<std::vector<double>> fallback = {}) {
    const auto r = raw(section, key);
    if (!r) {
      if (!fallback) issues.push_back("missing " + section + "." + key);
      return fallback.value_or(std::vector<double>{});
    }
    std::vector<double> out;
    for (const auto& item : split_list(*r)) out.push_back(parse_double(section + "." + key, item));
    return out;
  }

  std::vector<std::string> issues;

 private:
  double parse_double(const std::string& name, const std::string& text) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      issues.push_back(name + ": expected a number, got '" + text + "'");
      return std::nan("");
    }
  }

  const boost::property_tree::ptree& tree_;
};

inline std::vector<double> broadcast(std::vector<double> v, std::size_t n) {
  if (v.size() == 1 && n > 1) v.assign(n, v.front());
  return v;
}

}  // namespace detail

/// Parses and validates; throws ConfigError listing every problem found.
inline RunConfig parse(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config syntax: " + std::string(e.what()));
  }
  std::vector<std::string> issues;
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      issues.push_back("unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) issues.push_back("unknown key " + section + "." + key);
      cfg.snapshot[section + "." + key] = trim(value.data());
    }
  }

  detail::Reader r(tree);
  const std::size_t n = r.count("system", "n_dots");
  if (n > 64) {
    issues.push_back("system.n_dots above the supported maximum of 64");
    throw ConfigError(std::move(issues));
  }
  cfg.params.n_dots = n;
  cfg.params.eps = detail::broadcast(r.numbers("system", "eps"), n);
  cfg.params.g = r.number("system", "g");
  cfg.params.gamma = r.numbers("system", "gamma");

  const auto temps = detail::broadcast(r.numbers("reservoirs", "T", std::vector<double>{}), n);
  const auto mus = detail::broadcast(r.numbers("reservoirs", "mu", std::vector<double>{0.0}), n);
  const auto occ = detail::broadcast(r.numbers("reservoirs", "occupation", std::vector<double>{}), n);
  std::vector<bool> zero_t(n, false);
  if (const auto z = r.raw("reservoirs", "zero_temperature")) {
    auto items = split_list(*z);
    if (items.size() == 1 && n > 1) items.assign(n, items.front());
    if (items.size() != n) issues.push_back("length mismatch: reservoirs.zero_temperature");
    for (std::size_t j = 0; j < std::min(items.size(), n); ++j) {
      if (items[j] == "true" || items[j] == "1") zero_t[j] = true;
      else if (items[j] != "false" && items[j] != "0") issues.push_back("reservoirs.zero_temperature: expected true/false");
    }
  }
  if (occ.empty() && temps.size() != n) issues.push_back("length mismatch: reservoirs.T needs one entry per dot");
  if (!occ.empty() && occ.size() != n) issues.push_back("length mismatch: reservoirs.occupation needs one entry per dot");
  if (mus.size() != n) issues.push_back("length mismatch: reservoirs.mu needs one entry per dot");
  for (std::size_t j = 0; j < n; ++j) {
    ReservoirSpec s;
    s.temperature = j < temps.size() ? temps[j] : 1.0;
    s.mu = j < mus.size() ? mus[j] : 0.0;
    s.zero_temperature = zero_t[j];
    if (j < occ.size()) s.occupation = occ[j];
    cfg.reservoirs.push_back(s);
  }

  cfg.initial.n = detail::broadcast(r.numbers("initial", "n", std::vector<double>{0.0}), n);
  cfg.grid.t0 = r.number("simulation", "t0", 0.0);
  cfg.grid.t_end = r.number("simulation", "t_end", 1.0);
  cfg.grid.steps = r.count("simulation", "steps", 2);
  cfg.quadrature.abs_tol = r.number("quadrature", "abs_tol", cfg.quadrature.abs_tol);
  cfg.quadrature.window_factor = r.number("quadrature", "window_factor", cfg.quadrature.window_factor);

  if (const auto d = r.raw("output", "directory")) cfg.output_directory = *d;
  if (const auto f = r.raw("output", "formats")) cfg.formats = split_list(*f);

  if (r.raw("mpemba", "g_ep")) cfg.mpemba.g_ep = r.number("mpemba", "g_ep");
  cfg.mpemba.g_over = r.number("mpemba", "g_over", 0.0);
  cfg.mpemba.n_ep = r.numbers("mpemba", "n_ep", cfg.mpemba.n_ep);
  cfg.mpemba.n_over = r.numbers("mpemba", "n_over", cfg.mpemba.n_over);

  auto& sw = cfg.sweep;
  sw.detuning_min = r.number("sweep", "detuning_min", sw.detuning_min);
  sw.detuning_max = r.number("sweep", "detuning_max", sw.detuning_max);
  sw.detuning_points = r.count("sweep", "detuning_points", sw.detuning_points);
  sw.g_min = r.number("sweep", "g_min", sw.g_min);
  sw.g_max = r.number("sweep", "g_max", sw.g_max);
  sw.g_points = r.count("sweep", "g_points", sw.g_points);

  cfg.oracle.modes = r.count("oracle", "modes", cfg.oracle.modes);
  cfg.oracle.half_width = r.number("oracle", "half_width", 0.0);

  issues.insert(issues.end(), r.issues.begin(), r.issues.end());
  if (issues.empty()) {
    auto v = validation_issues(cfg.params, cfg.reservoirs);
    issues.insert(issues.end(), v.begin(), v.end());
    for (std::size_t j = 0; j < cfg.initial.n.size(); ++j)
      if (!(cfg.initial.n[j] >= 0.0 && cfg.initial.n[j] <= 1.0))
        issues.push_back("initial occupation of dot " + std::to_string(j + 1) + " outside [0,1]");
    if (cfg.initial.n.size() != n) issues.push_back("length mismatch: initial.n needs one entry per dot");
    if (cfg.grid.steps == 0) issues.push_back("simulation.steps must be positive");
    else if (cfg.grid.steps >= 2 && !(cfg.grid.t_end > cfg.grid.t0)) issues.push_back("simulation.t_end must exceed t0");
    if (!(cfg.quadrature.abs_tol > 0.0)) issues.push_back("quadrature.abs_tol must be positive");
    if (!(cfg.quadrature.window_factor > 0.0)) issues.push_back("quadrature.window_factor must be positive");
    for (const auto& f : cfg.formats)
      if (f != "csv" && f != "json" && f != "svg") issues.push_back("unknown output format '" + f + "'");
    if (sw.detuning_points == 0 || sw.g_points == 0) issues.push_back("sweep resolution must be positive");
    if (cfg.oracle.modes == 0) issues.push_back("oracle.modes must be positive");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

inline RunConfig parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

inline RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in);
}

}  // namespace epd::config
