#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"

namespace epd {

using cplx = std::complex<double>;

/// Dots, couplings and bare tunneling rates. Energies in units of T_1 throughout.
struct ChainParams {
  std::size_t n_dots = 2;
  std::vector<double> eps;    // dot energies, one per dot
  double g = 0.0;             // nearest-neighbour tunnel coupling
  std::vector<double> gamma;  // bare tunneling rate per dot, 0 = no reservoir

  /// Resonant chain with a common dot energy.
  static ChainParams resonant(std::vector<double> gamma, double g, double eps_d) {
    ChainParams p;
    p.n_dots = gamma.size();
    p.eps.assign(gamma.size(), eps_d);
    p.g = g;
    p.gamma = std::move(gamma);
    return p;
  }

  double total_gamma() const {
    double s = 0.0;
    for (double x : gamma) s += x;
    return s;
  }
  double max_gamma() const {
    double m = 0.0;
    for (double x : gamma) m = std::max(m, x);
    return m;
  }
  bool is_resonant() const {
    for (double e : eps)
      if (e != eps.front()) return false;
    return true;
  }
};

/// Fermionic reservoir attached to one dot.
struct ReservoirSpec {
  double temperature = 1.0;
  double mu = 0.0;
  bool zero_temperature = false;      // step-function occupation, temperature ignored
  std::optional<double> occupation;   // constant occupation replacing the Fermi function

  static ReservoirSpec thermal(double T, double mu) { return {T, mu, false, std::nullopt}; }
  static ReservoirSpec constant(double c) { return {1.0, 0.0, false, c}; }

  /// Occupation far below / far above the band centre.
  double lower_limit() const { return occupation ? *occupation : 1.0; }
  double upper_limit() const { return occupation ? *occupation : 0.0; }
};

/// Initial dot occupations; dot coherences are zero.
struct InitialConditions {
  std::vector<double> n;
};

struct TimeGrid {
  double t0 = 0.0;
  double t_end = 1.0;
  std::size_t steps = 2;

  /// A degenerate grid holding only t0 (steps == 1) is accepted.
  std::vector<double> times() const {
    std::vector<double> t(steps);
    if (steps == 1) {
      t[0] = t0;
      return t;
    }
    for (std::size_t i = 0; i < steps; ++i)
      t[i] = t0 + (t_end - t0) * static_cast<double>(i) / static_cast<double>(steps - 1);
    return t;
  }
};

namespace detail {
inline bool finite_all(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}
}  // namespace detail

/// Occupation of a reservoir mode at real energy eps.
inline double fermi(double eps, const ReservoirSpec& spec) {
  if (!std::isfinite(eps) || !std::isfinite(spec.mu)) throw ConfigError("fermi: non-finite input");
  if (spec.occupation) return *spec.occupation;
  if (spec.zero_temperature) {
    if (eps < spec.mu) return 1.0;
    if (eps > spec.mu) return 0.0;
    return 0.5;
  }
  if (!std::isfinite(spec.temperature) || spec.temperature <= 0.0)
    throw ConfigError("fermi: temperature must be positive and finite");
  const double x = (eps - spec.mu) / spec.temperature;
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// Analytic continuation of the Fermi function to complex energy.
inline cplx fermi(cplx z, const ReservoirSpec& spec) {
  if (spec.occupation) return *spec.occupation;
  const cplx x = (z - spec.mu) / spec.temperature;
  if (x.real() > 0.0) {
    const cplx e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// d f / d z for the continued Fermi function; zero for constant occupations.
inline cplx fermi_derivative(cplx z, const ReservoirSpec& spec) {
  if (spec.occupation) return 0.0;
  const cplx f = fermi(z, spec);
  return -f * (1.0 - f) / spec.temperature;
}

/// Parameters that passed validation.
struct CheckedConfig {
  ChainParams params;
  std::vector<ReservoirSpec> reservoirs;
};

/// Collects every violated invariant instead of stopping at the first one.
inline std::vector<std::string> validation_issues(const ChainParams& p,
                                                  const std::vector<ReservoirSpec>& specs) {
  std::vector<std::string> issues;
  if (p.n_dots < 2) issues.push_back("n_dots must be at least 2");
  if (p.eps.size() != p.n_dots)
    issues.push_back("length mismatch: eps has " + std::to_string(p.eps.size()) + " entries for " +
                     std::to_string(p.n_dots) + " dots");
  if (p.gamma.size() != p.n_dots)
    issues.push_back("length mismatch: gamma has " + std::to_string(p.gamma.size()) +
                     " entries for " + std::to_string(p.n_dots) + " dots");
  if (specs.size() != p.n_dots)
    issues.push_back("length mismatch: " + std::to_string(specs.size()) + " reservoirs for " +
                     std::to_string(p.n_dots) + " dots");
  if (!detail::finite_all(p.eps)) issues.push_back("non-finite dot energy");
  if (!std::isfinite(p.g)) issues.push_back("non-finite coupling g");
  for (std::size_t j = 0; j < p.gamma.size(); ++j) {
    if (!std::isfinite(p.gamma[j]))
      issues.push_back("non-finite rate at dot " + std::to_string(j + 1));
    else if (p.gamma[j] < 0.0)
      issues.push_back("negative rate at dot " + std::to_string(j + 1));
  }
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& s = specs[j];
    const std::string tag = "reservoir " + std::to_string(j + 1);
    if (!std::isfinite(s.mu)) issues.push_back(tag + ": non-finite chemical potential");
    if (s.occupation) {
      if (!(*s.occupation >= 0.0 && *s.occupation <= 1.0))
        issues.push_back(tag + ": occupation outside [0,1]");
    } else if (!s.zero_temperature && !(s.temperature > 0.0 && std::isfinite(s.temperature))) {
      issues.push_back(tag + ": non-positive temperature without zero-temperature flag");
    }
  }
  return issues;
}

/// Returns the configuration unchanged, or throws ConfigError listing every violation.
inline CheckedConfig validate(const ChainParams& p, const std::vector<ReservoirSpec>& specs) {
  auto issues = validation_issues(p, specs);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return {p, specs};
}

inline void validate_initial(const InitialConditions& init, std::size_t n_dots) {
  std::vector<std::string> issues;
  if (init.n.size() != n_dots)
    issues.push_back("length mismatch: " + std::to_string(init.n.size()) +
                     " initial occupations for " + std::to_string(n_dots) + " dots");
  for (std::size_t j = 0; j < init.n.size(); ++j)
    if (!(init.n[j] >= 0.0 && init.n[j] <= 1.0))
      issues.push_back("initial occupation of dot " + std::to_string(j + 1) + " outside [0,1]");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

inline void validate_grid(const TimeGrid& grid) {
  std::vector<std::string> issues;
  if (!std::isfinite(grid.t0) || !std::isfinite(grid.t_end)) issues.push_back("non-finite time grid");
  if (grid.steps == 0) issues.push_back("time grid needs at least one step");
  if (grid.steps >= 2 && !(grid.t_end > grid.t0)) issues.push_back("t_end must exceed t0");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

}  // namespace epd
