#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epdyn/errors.hpp"
#include "epdyn/heisenberg.hpp"
#include "epdyn/lindblad.hpp"
#include "epdyn/model.hpp"
#include "epdyn/time_series.hpp"

namespace epd::analysis {

/// chi_j(t) = |<N_j(t)> - <N_j>_ss|.
inline std::vector<double> chi(const he::PopulationSolver& s, const InitialConditions& init, double tau) {
  auto d = s.deviation(init, tau);
  for (double& x : d) x = std::abs(x);
  return d;
}

inline std::vector<double> chi(const ChainParams& p, const std::vector<ReservoirSpec>& specs,
                               const InitialConditions& init, double tau, const he::QuadratureSettings& q = {}) {
  return chi(he::PopulationSolver(p, specs, q), init, tau);
}

/// chi per dot over a grid: result[j][i].
inline std::vector<std::vector<double>> chi_series(const he::PopulationSolver& s, const InitialConditions& init,
                                                   const std::vector<double>& times, double t0) {
  std::vector<std::vector<double>> out(2, std::vector<double>(times.size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto c = chi(s, init, times[i] - t0);
    out[0][i] = c[0];
    out[1][i] = c[1];
  }
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS
  std::size_t points = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw NumericalError("fit_line: at least two points required");
  const double n = double(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericalError("fit_line: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  f.points = x.size();
  return f;
}

struct MpembaOptions {
  double mask_threshold = 1e-14;  // denominators below this are masked
  double fit_fraction = 0.5;      // fit starts this fraction of the way from the crossing to t_end
  bool check_regimes = true;
};

struct MpembaChannel {
  std::vector<double> chi_ep, chi_over;
  std::vector<double> ratio;          // NaN where masked
  std::vector<std::size_t> masked;
  double initial = 0.0;               // R_j(t0)
  std::optional<double> crossing;     // first time after which R stays < 1
  std::optional<LinearFit> fit;       // ln R - 2 ln t against t on [fit_start, t_end]
  double fit_start = 0.0;
  double target_slope = 0.0;          // -eta_over
  bool has_crossing() const { return crossing.has_value(); }
  double slope_error() const {
    if (!fit) return std::numeric_limits<double>::infinity();
    return std::abs(fit->slope - target_slope) / std::abs(target_slope);
  }
};

struct MpembaReport {
  std::vector<double> t;
  std::vector<MpembaChannel> channels;  // one per dot
  double eta_over = 0.0;
};

/// First grid time after which every remaining unmasked value is below 1.
inline std::optional<double> crossing_time(const std::vector<double>& t, const std::vector<double>& r) {
  std::optional<double> out;
  for (std::size_t i = t.size(); i-- > 0;) {
    if (std::isnan(r[i])) continue;
    if (r[i] >= 1.0) break;
    out = t[i];
  }
  return out;
}

inline MpembaChannel ratio_channel(const std::vector<double>& t, const std::vector<double>& num,
                                   const std::vector<double>& den, double t0, double eta_over,
                                   const MpembaOptions& opt) {
  MpembaChannel c;
  c.chi_ep = num;
  c.chi_over = den;
  c.target_slope = -eta_over;
  c.ratio.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (den[i] < opt.mask_threshold) {
      c.ratio[i] = std::numeric_limits<double>::quiet_NaN();
      c.masked.push_back(i);
    } else {
      c.ratio[i] = num[i] / den[i];
    }
  }
  c.initial = c.ratio.empty() ? 0.0 : c.ratio.front();
  c.crossing = crossing_time(t, c.ratio);
  if (c.crossing && !t.empty()) {
    c.fit_start = *c.crossing + opt.fit_fraction * (t.back() - *c.crossing);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double tau = t[i] - t0;
      if (t[i] < c.fit_start || std::isnan(c.ratio[i]) || !(c.ratio[i] > 0.0) || tau <= 0.0) continue;
      x.push_back(t[i]);
      y.push_back(std::log(c.ratio[i]) - 2.0 * std::log(tau));
    }
    if (x.size() >= 2) c.fit = fit_line(x, y);
  }
  return c;
}

/// R_j(t) = chi_j(EP, n_ep) / chi_j(overdamped, n_over) on a shared grid.
inline MpembaReport mpemba_ratio(const ChainParams& params_ep, const ChainParams& params_over,
                                 const std::vector<ReservoirSpec>& specs, const InitialConditions& init_ep,
                                 const InitialConditions& init_over, const TimeGrid& grid,
                                 const MpembaOptions& opt = {}, const he::QuadratureSettings& q = {}) {
  validate_grid(grid);
  if (params_ep.gamma != params_over.gamma)
    throw ConfigError("mpemba: both parameter sets must share the tunneling rates");
  double eta_over = 0.0;
  if (opt.check_regimes) {
    if (he::classify(params_ep).regime != he::Regime::ExceptionalPoint)
      throw ConfigError("mpemba: numerator parameters are not at the EP");
    if (he::classify(params_over).regime != he::Regime::Overdamped)
      throw ConfigError("mpemba: denominator parameters are not overdamped");
  }
  const auto e2 = he::eta_he(params_over).eta_squared;
  eta_over = e2 > 0.0 ? std::sqrt(e2) : 0.0;
  const he::PopulationSolver s_ep(params_ep, specs, q), s_over(params_over, specs, q);
  MpembaReport rep;
  rep.t = grid.times();
  rep.eta_over = eta_over;
  const auto num = chi_series(s_ep, init_ep, rep.t, grid.t0);
  const auto den = chi_series(s_over, init_over, rep.t, grid.t0);
  for (std::size_t j = 0; j < 2; ++j) rep.channels.push_back(ratio_channel(rep.t, num[j], den[j], grid.t0, eta_over, opt));
  return rep;
}

struct SweepCell {
  double detuning = 0.0;  // e1 - e2
  double g = 0.0;
  cplx lambda_plus, lambda_minus;
  bool defective = false;
};

struct SweepGrid {
  std::vector<double> detunings;
  std::vector<double> couplings;
  std::vector<SweepCell> cells;  // row-major: coupling index outer, detuning index inner
  const SweepCell& at(std::size_t ig, std::size_t id) const { return cells[ig * detunings.size() + id]; }
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {a};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * double(i) / double(n - 1);
  out.back() = b;
  return out;
}

/// Eigenvalues of the detuned double-dot matrix, -(a+b)/2 +- sqrt(((a-b)/2)^2 - g^2) with the
/// principal root, for e_{1,2} = centre +- detuning/2.
inline SweepGrid riemann_sweep(const ChainParams& base, std::pair<double, double> detuning_range,
                               std::pair<double, double> g_range, std::pair<std::size_t, std::size_t> resolution) {
  if (base.n_dots != 2) throw ConfigError("riemann_sweep: double dot required (n_dots = 2)");
  SweepGrid grid;
  grid.detunings = linspace(detuning_range.first, detuning_range.second, resolution.first);
  grid.couplings = linspace(g_range.first, g_range.second, resolution.second);
  const double centre = 0.5 * (base.eps[0] + base.eps[1]);
  const cplx i(0.0, 1.0);
  for (double g : grid.couplings) {
    for (double d : grid.detunings) {
      ChainParams p = base;
      p.g = g;
      p.eps = {centre + d / 2.0, centre - d / 2.0};
      if (d == 0.0) p.eps = {centre, centre};
      const cplx a = p.gamma[0] / 2.0 + i * p.eps[0], b = p.gamma[1] / 2.0 + i * p.eps[1];
      const cplx h = (a - b) / 2.0;
      const cplx root = std::sqrt(h * h - g * g);
      SweepCell c;
      c.detuning = d;
      c.g = g;
      c.lambda_plus = -(a + b) / 2.0 + root;
      c.lambda_minus = -(a + b) / 2.0 - root;
      c.defective = p.is_resonant() && he::classify(p).regime == he::Regime::ExceptionalPoint;
      grid.cells.push_back(c);
    }
  }
  return grid;
}

struct RegimeCurve {
  ChainParams params;
  he::Regime regime = he::Regime::Overdamped;
  TimeSeries series;                 // N1, N2 (HE) and optionally ME_N1, ME_N2
  std::vector<bool> has_extremum;    // per dot, local extremum beyond t0 + 1/G
  std::vector<bool> monotone;        // per dot, monotone beyond t0 + transient window
  double transient_window = 0.0;
  double me_min_eigenvalue = 1.0;
  /// Underdamped curves oscillate; overdamped and EP curves settle monotonically.
  bool consistent() const {
    if (regime == he::Regime::Underdamped) return std::find(has_extremum.begin(), has_extremum.end(), true) != has_extremum.end();
    return std::find(monotone.begin(), monotone.end(), false) == monotone.end();
  }
};

struct RegimeOptions {
  bool normalize = false;
  bool with_me = false;
  double window_factor = 2.0;  // transient window = window_factor / G
};

namespace detail {

inline bool local_extremum_after(const std::vector<double>& t, const std::vector<double>& y, double from) {
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (t[i] <= from) continue;
    const double a = y[i] - y[i - 1], b = y[i + 1] - y[i];
    if ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)) return true;
  }
  return false;
}

inline bool monotone_after(const std::vector<double>& t, const std::vector<double>& y, double from, double tol) {
  int dir = 0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (t[i - 1] < from) continue;
    const double d = y[i] - y[i - 1];
    if (std::abs(d) <= tol) continue;
    const int s = d > 0.0 ? 1 : -1;
    if (dir == 0) dir = s;
    else if (s != dir) return false;
  }
  return true;
}

}  // namespace detail

/// Population curves per parameter set with the qualitative regime checks.
inline std::vector<RegimeCurve> regime_curves(const std::vector<ChainParams>& params_list,
                                              const std::vector<ReservoirSpec>& specs, const InitialConditions& init,
                                              const TimeGrid& grid, const RegimeOptions& opt = {},
                                              const he::QuadratureSettings& q = {}) {
  validate_grid(grid);
  std::vector<RegimeCurve> out;
  for (const auto& p : params_list) {
    RegimeCurve c;
    c.params = p;
    c.regime = he::classify(p).regime;
    const he::PopulationSolver s(p, specs, q);
    const auto times = grid.times();
    std::vector<double> ss{1.0, 1.0};
    if (opt.normalize) ss = s.steady_state();
    std::vector<std::vector<double>> n(2, std::vector<double>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto v = s.populations(init, times[i] - grid.t0);
      for (std::size_t j = 0; j < 2; ++j) n[j][i] = v[j] / ss[j];
    }
    c.series.t = times;
    c.series.provenance = "HE";
    c.series.add_channel("N1", n[0]);
    c.series.add_channel("N2", n[1]);
    if (opt.with_me) {
      const auto ev = me::evolve(me::build_liouvillian(p, specs), me::product_state(init.n), grid);
      c.me_min_eigenvalue = ev.min_eigenvalue;
      const auto mp = me::me_populations(ev, 2);
      std::vector<double> mss{1.0, 1.0};
      if (opt.normalize) mss = me::occupations(me::steady_state(me::build_liouvillian(p, specs)), 2);
      for (std::size_t j = 0; j < 2; ++j) {
        auto v = mp.channel("N" + std::to_string(j + 1));
        for (double& x : v) x /= mss[j];
        c.series.add_channel("ME_N" + std::to_string(j + 1), std::move(v));
      }
    }
    const double gt = p.total_gamma();
    c.transient_window = opt.window_factor / gt;
    for (std::size_t j = 0; j < 2; ++j) {
      double span = 0.0;
      for (double x : n[j]) span = std::max(span, std::abs(x - n[j].back()));
      c.has_extremum.push_back(detail::local_extremum_after(times, n[j], grid.t0 + 1.0 / gt));
      c.monotone.push_back(detail::monotone_after(times, n[j], grid.t0 + c.transient_window, 1e-12 * std::max(span, 1e-300)));
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace epd::analysis
