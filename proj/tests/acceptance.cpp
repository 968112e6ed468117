// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "epdyn/epdyn.hpp"

using namespace epd;

namespace {

struct Physicality {
  double me_trace = 0.0;
  double me_hermiticity = 0.0;
  double me_min_eigenvalue = 1.0;
  std::size_t me_runs = 0;
  double pop_min = std::numeric_limits<double>::infinity();
  double pop_max = -std::numeric_limits<double>::infinity();
  std::size_t pop_runs = 0;
  std::vector<std::string> failures;

  void record(const me::Evolution& ev) {
    me_trace = std::max(me_trace, ev.max_trace_deviation);
    me_hermiticity = std::max(me_hermiticity, ev.max_hermiticity);
    me_min_eigenvalue = std::min(me_min_eigenvalue, ev.min_eigenvalue);
    ++me_runs;
  }
  void record(const std::vector<double>& pops) {
    for (double x : pops) {
      pop_min = std::min(pop_min, x);
      pop_max = std::max(pop_max, x);
    }
    ++pop_runs;
  }
  void record(const TimeSeries& ts) {
    for (const auto& c : ts.channels) record(c);
  }
};

Physicality physicality;

ChainParams dqd(double g1, double g2, double g) { return ChainParams::resonant({g1, g2}, g, 1.0); }

std::vector<ReservoirSpec> thermal() { return {ReservoirSpec::thermal(1.0, 0.0), ReservoirSpec::thermal(0.1, 0.0)}; }

me::Evolution evolve_recorded(const ChainParams& p, const std::vector<ReservoirSpec>& s, const std::vector<double>& n,
                              const TimeGrid& grid) {
  try {
    auto ev = me::evolve(me::build_liouvillian(p, s), me::product_state(n), grid);
    physicality.record(ev);
    return ev;
  } catch (const NumericalError& e) {
    physicality.failures.push_back(e.what());
    throw;
  }
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <class... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Outcome ep_coincidence() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rate = [&] { return 1.0 - u(rng); };  // (0, 1]
  std::size_t mismatches = 0, eps = 0;
  double worst = 0.0, worst_generic = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double g1 = rate(), g2 = rate();
    const double g = (k % 4 == 0) ? he::g_ep(g1, g2) : rate();
    const auto p = dqd(g1, g2, g);
    const bool he_flag = he::classify(p).regime == he::Regime::ExceptionalPoint;
    const auto l = me::build_liouvillian(p, thermal());
    const bool me_flag = me::half_rate_defective(l, p.total_gamma());
    if (he_flag) ++eps;
    if (he_flag != me_flag) ++mismatches;
    const double d = std::abs(me::extract_eta_me(l, p.total_gamma()) - he::eta_he(p).eta);
    worst = std::max(worst, d);
    if (k % 4 != 0) worst_generic = std::max(worst_generic, d);
  }
  return {mismatches == 0 && worst <= 1e-9 && eps > 0,
          fmt("1000 draws (%zu at the EP), flag mismatches %zu, max |eta_ME - eta_HE| = %.3g, %.3g off the EP "
              "(tol 1e-9)",
              eps, mismatches, worst, worst_generic)};
}

Outcome ep_locations() {
  const double a = he::g_ep(0.5, 0.1), b = he::g_ep(1e-2, 1e-3);
  const double ea = std::abs(a - 0.1) / 0.1, eb = std::abs(b - 2.25e-3) / 2.25e-3;
  const double eta_a = he::eta_he(dqd(0.5, 0.1, a)).eta_squared, eta_b = he::eta_he(dqd(1e-2, 1e-3, b)).eta_squared;
  const double ulp = std::numeric_limits<double>::epsilon();
  return {ea <= ulp && eb <= ulp && eta_a == 0.0 && eta_b == 0.0,
          fmt("g_EP = %.17g and %.17g, relative errors %.2g and %.2g (tol %.2g)", a, b, ea, eb, ulp)};
}

Outcome weak_coupling_agreement() {
  // relative to each HE curve's peak magnitude; the pointwise ratio is reported too
  const double gt = 0.011;
  const TimeGrid grid{0.0, 20.0 / gt, 201};
  double worst = 0.0, pointwise = 0.0;
  for (double g : {5e-2, 2.25e-3, 1e-3}) {
    const auto p = dqd(1e-2, 1e-3, g);
    const auto ev = evolve_recorded(p, thermal(), {1.0, 0.0}, grid);
    const auto ts = me::me_populations(ev, 2);
    const he::PopulationSolver s(p, thermal());
    double dev[2] = {0, 0}, scale[2] = {0, 0};
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto n = s.populations({{1.0, 0.0}}, ts.t[i]);
      physicality.record(n);
      for (std::size_t j = 0; j < 2; ++j) {
        const double d = std::abs(ts.channels[j][i] - n[j]);
        dev[j] = std::max(dev[j], d);
        scale[j] = std::max(scale[j], std::abs(n[j]));
        if (i > 0) pointwise = std::max(pointwise, d / std::abs(n[j]));
      }
    }
    worst = std::max({worst, dev[0] / scale[0], dev[1] / scale[1]});
  }
  return {worst <= 0.05, fmt("max HE/ME deviation %.4g of the curve scale over t in [0, 20/G], three couplings "
                             "(tol 0.05); pointwise ratio %.3g",
                             worst, pointwise)};
}

Outcome oracle_equivalence() {
  const auto p = dqd(0.5, 0.1, 0.1);
  const InitialConditions init{{1.0, 0.0}};
  const TimeGrid grid{0.0, 10.0 / 0.6, 41};
  const he::PopulationSolver s(p, thermal());
  std::vector<std::vector<double>> he_n;
  for (double t : grid.times()) he_n.push_back(s.populations(init, t));
  auto deviation = [&](std::size_t m, double w, std::string& solver) {
    const auto ts = bath::oracle_dot_populations(p, thermal(), init, grid, {m, w});
    physicality.record(ts);
    solver = ts.metadata.at("eigensolver");
    double d = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = 0; j < 2; ++j) d = std::max(d, std::abs(ts.channels[j][i] - he_n[i][j]));
    return d;
  };
  const double wb = bath::default_half_width(p, thermal());
  std::string solver_a, solver_b;
  const double coarse = deviation(1500, wb / 2.0, solver_a);
  const double fine = deviation(3000, wb, solver_b);
  return {fine <= 1e-2 && fine < coarse,
          fmt("max |oracle - HE| = %.3g at M = 3000, W_b = %.0f (tol 1e-2); %.3g at M = 1500, W_b = %.0f; solver %s",
              fine, wb, coarse, wb / 2.0, solver_b.c_str())};
}

Outcome uniform_stationarity() {
  double he_worst = 0.0, me_worst = 0.0;
  for (double c : {0.2, 0.5, 0.9}) {
    const std::vector<ReservoirSpec> s(2, ReservoirSpec::constant(c));
    for (const auto& p : {dqd(0.5, 0.1, 0.1), dqd(0.1, 0.5, 0.1), dqd(0.5, 0.1, 0.05), dqd(0.1, 0.5, 3.0)}) {
      const auto h = he::steady_state_populations(p, s);
      const auto m = me::occupations(me::steady_state(me::build_liouvillian(p, s)), 2);
      for (int j = 0; j < 2; ++j) {
        he_worst = std::max(he_worst, std::abs(h[j] - c));
        me_worst = std::max(me_worst, std::abs(m[j] - c));
      }
    }
  }
  return {he_worst <= 1e-6 && me_worst <= 1e-10,
          fmt("max |N - c|: HE %.3g (tol 1e-6), ME %.3g (tol 1e-10)", he_worst, me_worst)};
}

Outcome jordan_identity() {
  double worst = 0.0;
  for (const auto& p : {dqd(0.5, 0.1, 0.1), dqd(1e-2, 1e-3, 2.25e-3), dqd(0.1, 0.5, 0.1)}) {
    const auto a = he::build_A(p);
    const double t_end = 50.0 / p.total_gamma();
    for (double t : TimeGrid{0.0, t_end, 1001}.times())
      worst = std::max(worst, (he::jordan_propagator(a, t) - linalg::expm(a, t)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, fmt("max entrywise |D_EP - expm| over t in [0, 50/G] = %.3g (tol 1e-10)", worst)};
}

Outcome mpemba() {
  struct Case {
    const char* name;
    double g1, g2, g_ep, g_over, t_end;
    std::size_t steps;
  };
  const Case cases[] = {{"strong", 0.5, 0.1, 0.1, 0.05, 100.0, 401}, {"weak", 1e-2, 1e-3, 2.25e-3, 1e-3, 5400.0, 541}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto rep = analysis::mpemba_ratio(dqd(c.g1, c.g2, c.g_ep), dqd(c.g1, c.g2, c.g_over), thermal(), {{1, 1}},
                                            {{0.5, 0.5}}, {0.0, c.t_end, c.steps});
    const auto& r1 = rep.channels[0];
    const double slope = r1.fit ? r1.fit->slope : std::nan("");
    const bool pass = r1.initial > 1.0 && r1.has_crossing() && r1.slope_error() <= 0.1;
    ok = ok && pass;
    detail += fmt("%s: R1(0) = %.4g, crossing %s, slope %.4g vs -eta = %.4g (rel err %.3g, tol 0.1); ", c.name,
                  r1.initial, r1.crossing ? fmt("t = %.4g", *r1.crossing).c_str() : "none", slope, r1.target_slope,
                  r1.slope_error());
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome t_squared() {
  bool ok = true;
  std::string detail;
  for (const auto& p : {dqd(0.5, 0.1, 0.1), dqd(1e-2, 1e-3, 2.25e-3)}) {
    const double gt = p.total_gamma();
    const he::PopulationSolver s(p, thermal());
    std::vector<double> x;
    std::vector<std::vector<double>> y(2);
    for (double t : TimeGrid{5.0 / gt, 20.0 / gt, 61}.times()) {
      const auto n = s.initial_term({{1, 1}}, t);
      x.push_back(std::log(t));
      for (int j = 0; j < 2; ++j) y[j].push_back(std::log(n[j] * std::exp(gt * t / 2.0)));
    }
    for (int j = 0; j < 2; ++j) {
      const double slope = analysis::fit_line(x, y[j]).slope;
      ok = ok && std::abs(slope - 2.0) <= 0.05;
      detail += fmt("G = %.3g dot %d slope %.4g; ", gt, j + 1, slope);
    }
  }
  detail += "tol 2 +- 0.05";
  return {ok, detail};
}

Outcome chain_spectra() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k)
    for (std::size_t n = 2; n <= 12; ++n) {
      const auto p = chains::alternating_chain(n, 1.0 - u(rng), 1.0 - u(rng), 1.0 - u(rng), 2.0 * u(rng) - 1.0);
      worst = std::max(worst, chains::max_spectrum_deviation(chains::closed_form_spectrum(p).eigenvalues,
                                                             chains::build_chain_A(p).eigenvalues()));
    }
  bool contained = true;
  double ratio = 0.0;
  const std::vector<ReservoirSpec> s3{ReservoirSpec::thermal(1.0, 0.0), ReservoirSpec::thermal(1.0, 0.0),
                                      ReservoirSpec::thermal(0.1, 0.0)};
  for (int k = 0; k < 20; ++k) {
    const auto r = chains::three_dot_liouvillian_check(1.0 - u(rng), 1.0 - u(rng), 1.0 - u(rng), 1.0, s3);
    contained = contained && r.contained;
    ratio = std::max(ratio, r.max_distance / (r.tolerance / 1e-8));
  }
  const double gam = 0.5, g_ref = gam / (4.0 * std::sqrt(2.0));
  const auto g3 = chains::closed_form_ep_couplings(3, gam, 0.0);
  const double g_err = g3.empty() ? 1.0 : std::abs(g3[0] - g_ref) / g_ref;
  const auto r = chains::three_dot_liouvillian_check(gam, 0.0, g_ref, 1.0, s3);
  const bool ep_ok = g_err <= 2.0 * std::numeric_limits<double>::epsilon() && r.he_defective && r.me_defective;
  return {worst <= 1e-10 && contained && ep_ok,
          fmt("N <= 12 x 100 draws max deviation %.3g (tol 1e-10); 3-dot ME containment max %.3g |L| (tol 1e-8 |L|); "
              "boundary EP g relative error %.2g, HE/ME defective %d/%d",
              worst, ratio, g_err, int(r.he_defective), int(r.me_defective))};
}

Outcome physicality_suite() {
  // regime trajectories on top of everything recorded by the other criteria
  for (const auto& [g1, g2, gs, t_end] :
       std::vector<std::tuple<double, double, std::vector<double>, double>>{{0.5, 0.1, {3.0, 0.05, 0.1}, 50.0},
                                                                           {1e-2, 1e-3, {5e-2, 1e-3, 2.25e-3}, 1800.0}}) {
    for (double g : gs)
      for (const std::vector<double>& n : {std::vector<double>{1, 0}, std::vector<double>{1, 1}}) {
        const auto p = dqd(g1, g2, g);
        const TimeGrid grid{0.0, t_end, 101};
        try {
          evolve_recorded(p, thermal(), n, grid);
        } catch (const NumericalError&) {
        }
        const he::PopulationSolver s(p, thermal());
        std::vector<double> all;
        for (double t : grid.times())
          for (double x : s.populations({n}, t)) all.push_back(x);
        physicality.record(all);
      }
  }
  const auto& ph = physicality;
  const bool ok = ph.failures.empty() && ph.me_trace <= 1e-12 && ph.me_hermiticity <= 1e-12 &&
                  ph.me_min_eigenvalue >= -1e-10 && ph.pop_min >= -1e-6 && ph.pop_max <= 1.0 + 1e-6;
  return {ok, fmt("%zu ME runs: trace %.3g, hermiticity %.3g, min eigenvalue %.3g; %zu HE/oracle runs in [%.6g, %.6g]; "
                  "%zu rejected states",
                  ph.me_runs, ph.me_trace, ph.me_hermiticity, ph.me_min_eigenvalue, ph.pop_runs, ph.pop_min,
                  ph.pop_max, ph.failures.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"EP coincidence", ep_coincidence},
      {"EP locations", ep_locations},
      {"weak-coupling HE/ME agreement", weak_coupling_agreement},
      {"finite-bath oracle equivalence", oracle_equivalence},
      {"uniform-occupancy stationarity", uniform_stationarity},
      {"Jordan propagator identity", jordan_identity},
      {"Mpemba ratio", mpemba},
      {"t^2 transient signature", t_squared},
      {"chain spectra", chain_spectra},
      {"physicality", physicality_suite},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
