#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"
#include "epdyn/linalg.hpp"
#include "epdyn/model.hpp"
#include "epdyn/quadrature.hpp"

namespace epd::he {

struct EtaValue {
  double eta_squared = 0.0;
  cplx eta;  // principal root: real >= 0, or i*|eta| when eta_squared < 0
};

enum class Regime { Underdamped, Overdamped, ExceptionalPoint };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Underdamped: return "underdamped";
    case Regime::Overdamped: return "overdamped";
    case Regime::ExceptionalPoint: return "EP";
  }
  return "?";
}

struct DampingRegime {
  Regime regime;
  double theta;
};

struct QuadratureSettings {
  double abs_tol = 1e-9;
  double window_factor = 40.0;
  std::size_t max_panels = 2'000'000;

  void validate() const {
    std::vector<std::string> issues;
    if (!(abs_tol > 0.0)) issues.push_back("quadrature abs_tol must be positive");
    if (!(window_factor >= 10.0)) issues.push_back("quadrature window_factor must be at least 10");
    if (max_panels == 0) issues.push_back("quadrature max_panels must be positive");
    if (!issues.empty()) throw ConfigError(std::move(issues));
  }
};

/// Evolution matrix of the double dot, A = -[[G1/2 + i e1, i g], [i g, G2/2 + i e2]].
inline ComplexMatrix build_A(const ChainParams& p) {
  if (p.n_dots != 2 || p.eps.size() != 2 || p.gamma.size() != 2)
    throw ConfigError("build_A: double dot required (n_dots = 2)");
  const cplx i(0.0, 1.0);
  ComplexMatrix a(2, 2);
  a << -(p.gamma[0] / 2.0 + i * p.eps[0]), -i * p.g,  //
      -i * p.g, -(p.gamma[1] / 2.0 + i * p.eps[1]);
  return a;
}

inline EtaValue make_eta(double eta_squared) {
  EtaValue e;
  e.eta_squared = eta_squared;
  e.eta = eta_squared >= 0.0 ? cplx(std::sqrt(eta_squared), 0.0) : cplx(0.0, std::sqrt(-eta_squared));
  return e;
}

inline EtaValue eta_he(const ChainParams& p) {
  if (p.n_dots != 2 || p.gamma.size() != 2) throw ConfigError("eta_he: double dot required");
  if (!p.is_resonant())
    throw ConfigError("resonance required: eta has no closed form for detuned dots; use the sweep operation");
  const double d = (p.gamma[0] - p.gamma[1]) / 4.0;
  return make_eta(d * d - p.g * p.g);
}

/// Coupling at which eta vanishes.
inline double g_ep(double gamma1, double gamma2) { return std::abs(gamma1 - gamma2) / 4.0; }

inline double default_theta(const ChainParams& p) {
  const double m = p.max_gamma();
  return 1e-12 * m * m;
}

inline DampingRegime classify(const ChainParams& p, std::optional<double> theta = std::nullopt) {
  const double th = theta.value_or(default_theta(p));
  const double e2 = eta_he(p).eta_squared;
  // equal rates make A normal and g = 0 makes it diagonal: neither can be defective
  const bool can_coalesce = p.g != 0.0 && p.gamma[0] != p.gamma[1];
  if (can_coalesce && std::abs(e2) <= th) return {Regime::ExceptionalPoint, th};
  return {e2 < 0.0 ? Regime::Underdamped : Regime::Overdamped, th};
}

namespace detail {

/// sinh(x)/x, accurate near zero.
inline cplx sinhc(cplx x) {
  if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0;
  return std::sinh(x) / x;
}

/// e^{A u} for a 1x1 or 2x2 matrix through e^{mu}[cosh(eta u) I + u sinhc(eta u) (A - m I)],
/// m = tr A / 2. Uniform across the exceptional point.
inline ComplexMatrix small_exp(const ComplexMatrix& a, double u) {
  const auto n = a.rows();
  if (n == 1) return ComplexMatrix::Constant(1, 1, std::exp(a(0, 0) * u));
  const cplx m = 0.5 * (a(0, 0) + a(1, 1));
  ComplexMatrix nm = a;
  nm(0, 0) -= m;
  nm(1, 1) -= m;
  const cplx eta = std::sqrt(nm(0, 0) * nm(0, 0) + nm(0, 1) * nm(1, 0));
  const cplx ep = std::exp((m + eta) * u), em = std::exp((m - eta) * u);
  const cplx c = 0.5 * (ep + em);
  const cplx s = std::abs(eta * u) < 1.0 ? std::exp(m * u) * u * sinhc(eta * u) : (ep - em) / (2.0 * eta);
  ComplexMatrix d = s * nm;
  d(0, 0) += c;
  d(1, 1) += c;
  return d;
}

inline bool in_fallback_band(const ChainParams& p, double eta_squared) {
  const double m = p.max_gamma();
  if (m == 0.0) return false;
  const double r = std::abs(eta_squared) / (m * m);
  return r > 1e-12 && r < 1e-6;
}

}  // namespace detail

/// e^{A t} at the exceptional point: e^{lambda t}(I + t N) with N_{jj'} = T_{j1} T^{-1}_{2j'}
/// assembled from a numerically built Jordan basis T = [N v', v'].
inline ComplexMatrix jordan_propagator(const ComplexMatrix& a, double t) {
  if (a.rows() != 2) throw NumericalError("jordan_propagator: 2x2 matrix required");
  const cplx lambda = 0.5 * a.trace();
  const ComplexMatrix nil = a - lambda * ComplexMatrix::Identity(2, 2);
  const Eigen::Index k = nil.col(0).norm() >= nil.col(1).norm() ? 0 : 1;
  ComplexMatrix tm(2, 2);
  const ComplexVector vp = ComplexVector::Unit(2, k);
  tm.col(0) = nil * vp;
  tm.col(1) = vp;
  ComplexMatrix d = ComplexMatrix::Identity(2, 2);
  if (tm.col(0).norm() > 0.0) {
    const ComplexMatrix tinv = tm.inverse();
    d += t * tm.col(0) * tinv.row(1);
  }
  return std::exp(lambda * t) * d;
}

/// S e^{A_d t} S^{-1} from the numerical eigenvectors.
inline ComplexMatrix spectral_propagator(const linalg::SpectralDecomposition& sd, double t) {
  const auto& s = sd.right_eigenvectors;
  ComplexVector ex(sd.eigenvalues.size());
  for (Eigen::Index i = 0; i < ex.size(); ++i) ex(i) = std::exp(sd.eigenvalues(i) * t);
  return s * ex.asDiagonal() * s.inverse();
}

enum class PropagatorPath { Spectral, Jordan, Expm };

inline const char* to_string(PropagatorPath p) {
  switch (p) {
    case PropagatorPath::Spectral: return "spectral";
    case PropagatorPath::Jordan: return "jordan";
    case PropagatorPath::Expm: return "expm";
  }
  return "?";
}

struct Propagator {
  ComplexMatrix d;
  PropagatorPath path;
  std::vector<std::string> warnings;
};

/// D(t) = e^{A t}. Resonant dots use the closed forms (spectral away from the
/// EP, Jordan at it); detuned dots, the ill-conditioned band next to the EP and
/// eigenvector matrices with condition above 1e8 go through expm.
inline Propagator propagator(const ChainParams& p, double t) {
  const ComplexMatrix a = build_A(p);
  if (t == 0.0) return {ComplexMatrix::Identity(2, 2), PropagatorPath::Spectral, {}};
  if (!p.is_resonant()) return {linalg::expm(a, t), PropagatorPath::Expm, {}};
  const EtaValue e = eta_he(p);
  if (classify(p).regime == Regime::ExceptionalPoint) return {jordan_propagator(a, t), PropagatorPath::Jordan, {}};
  if (detail::in_fallback_band(p, e.eta_squared))
    return {linalg::expm(a, t), PropagatorPath::Expm,
            {"eta^2 inside the ill-conditioned band next to the EP; used expm"}};
  const auto sd = linalg::eigendecompose(a);
  if (sd.condition_estimate > 1e8)
    return {linalg::expm(a, t), PropagatorPath::Expm,
            {"eigenvector matrix condition " + std::to_string(sd.condition_estimate) + " above 1e8; used expm"}};
  return {spectral_propagator(sd, t), PropagatorPath::Spectral, {}};
}

/// How the reservoir (noise) contribution is evaluated.
///   Residue:    time-independent base integrals by quadrature plus the
///               oscillatory cross term by contour residues.
///   TimeDomain: direct double integral over the kernel times in t.
///   Auto:       Residue, except TimeDomain for zero temperature and for
///               pi*T*tau < 0.01 where the Matsubara sum converges slowly.
enum class Method { Auto, Residue, TimeDomain };

/// Exact wide-band populations of the double dot for a fixed parameter set.
/// Construction precomputes the base energy integrals; queries at individual
/// times are then cheap. Thread-safe for concurrent const queries.
class PopulationSolver {
 public:
  PopulationSolver(const ChainParams& p, const std::vector<ReservoirSpec>& specs,
                   QuadratureSettings q = {}, Method method = Method::Auto)
      : params_(p), specs_(specs), q_(q), method_(method) {
    validate(p, specs);
    q.validate();
    if (p.n_dots != 2) throw ConfigError("populations: double dot required (n_dots = 2)");
    a_ = build_A(p);
    if (p.g == 0.0) {
      blocks_.push_back(make_block({0}));
      blocks_.push_back(make_block({1}));
    } else {
      blocks_.push_back(make_block({0, 1}));
    }
  }

  const ChainParams& params() const { return params_; }
  const ComplexMatrix& matrix() const { return a_; }

  bool has_steady_state() const {
    for (double g : params_.gamma)
      if (g > 0.0) return true;
    return false;
  }

  /// Long-time populations; independent of the initial occupations.
  std::vector<double> steady_state() const {
    if (!has_steady_state()) throw ConfigError("no steady state: every tunneling rate is zero");
    std::vector<double> out(2, 0.0);
    for (const auto& b : blocks_) {
      const auto n = b.dots.size();
      for (const auto& r : b.res)
        for (std::size_t j = 0; j < n; ++j)
          out[b.dots[j]] += r.gamma * std::real(r.base[idx(n, j, r.local, r.local)]);
    }
    return out;
  }

  /// Sum_m |D_jm(tau)|^2 n_m.
  std::vector<double> initial_term(const InitialConditions& init, double tau) const {
    validate_initial(init, 2);
    std::vector<double> out(2, 0.0);
    for (const auto& b : blocks_) {
      const ComplexMatrix e = linalg::expm(b.a, tau);
      for (std::size_t j = 0; j < b.dots.size(); ++j)
        for (std::size_t m = 0; m < b.dots.size(); ++m)
          out[b.dots[j]] += std::norm(e(j, m)) * init.n[b.dots[m]];
    }
    return out;
  }

  /// <N_j(t0 + tau)> - <N_j>_ss, evaluated without forming the difference
  /// on the residue path so that it keeps relative accuracy at long times.
  std::vector<double> deviation(const InitialConditions& init, double tau) const {
    check_tau(tau);
    std::vector<double> out = initial_term(init, tau);
    for (const auto& b : blocks_)
      for (const auto& r : b.res) {
        const auto v = use_time_domain(r, tau) ? td_deviation(b, r, tau) : residue_deviation(b, r, tau);
        for (std::size_t j = 0; j < b.dots.size(); ++j) out[b.dots[j]] += r.gamma * v[j];
      }
    return out;
  }

  /// <N_j(t0 + tau)>.
  std::vector<double> populations(const InitialConditions& init, double tau) const {
    check_tau(tau);
    if (tau == 0.0) {
      validate_initial(init, 2);
      return init.n;
    }
    std::vector<double> out = initial_term(init, tau);
    for (const auto& b : blocks_)
      for (const auto& r : b.res) {
        std::vector<double> v;
        if (use_time_domain(r, tau)) {
          v = td_noise(b, r, tau);
        } else {
          v = residue_deviation(b, r, tau);
          for (std::size_t j = 0; j < b.dots.size(); ++j)
            v[j] += std::real(r.base[idx(b.dots.size(), j, r.local, r.local)]);
        }
        for (std::size_t j = 0; j < b.dots.size(); ++j) out[b.dots[j]] += r.gamma * v[j];
      }
    return out;
  }

  /// Reservoir contribution Sum_m Gamma_m Int f_m |K_jm|^2 at tau by the requested method.
  std::vector<double> reservoir_term(double tau, Method m) const {
    check_tau(tau);
    std::vector<double> out(2, 0.0);
    for (const auto& b : blocks_)
      for (const auto& r : b.res) {
        std::vector<double> v;
        if (m == Method::TimeDomain || (m == Method::Auto && use_time_domain(r, tau))) {
          v = td_noise(b, r, tau);
        } else {
          if (r.spec.zero_temperature && !r.spec.occupation)
            throw NumericalError("residue evaluation needs a finite temperature");
          v = residue_deviation(b, r, tau);
          for (std::size_t j = 0; j < b.dots.size(); ++j)
            v[j] += std::real(r.base[idx(b.dots.size(), j, r.local, r.local)]);
        }
        for (std::size_t j = 0; j < b.dots.size(); ++j) out[b.dots[j]] += r.gamma * v[j];
      }
    return out;
  }

  double window() const { return window_; }

 private:
  struct Reservoir {
    std::size_t local;  // dot index inside the block
    double gamma;
    ReservoirSpec spec;
    std::vector<cplx> base;  // B_{jkl} = Int de/2pi f G_jk conj(G_jl), flattened (j,k,l)
  };
  struct Block {
    std::vector<std::size_t> dots;
    ComplexMatrix a;
    std::vector<Reservoir> res;
  };

  static std::size_t idx(std::size_t n, std::size_t j, std::size_t k, std::size_t l) {
    return (j * n + k) * n + l;
  }

  static void check_tau(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("populations: t must not precede t0");
  }

  bool use_time_domain(const Reservoir& r, double tau) const {
    if (method_ == Method::TimeDomain) return true;
    if (method_ == Method::Residue) return false;
    if (r.spec.occupation) return false;
    if (r.spec.zero_temperature) return true;
    return M_PI * r.spec.temperature * tau < 0.01;
  }

  double centre() const { return 0.5 * (params_.eps[0] + params_.eps[1]); }

  Block make_block(std::vector<std::size_t> dots) {
    Block b;
    const auto n = dots.size();
    b.a.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) b.a(i, k) = a_(dots[i], dots[k]);
    b.dots = dots;

    double tmax = 0.0, spread = 0.0;
    for (const auto& s : specs_)
      if (!s.occupation && !s.zero_temperature) tmax = std::max(tmax, s.temperature);
    for (const auto& s : specs_)
      if (!s.occupation) spread = std::max(spread, std::abs(s.mu - centre()) + 10.0 * tmax);
    const double scale = std::max({params_.total_gamma(), tmax, spread, std::abs(params_.g),
                                   std::abs(params_.eps[0] - params_.eps[1])});
    window_ = q_.window_factor * (scale > 0.0 ? scale : 1.0);

    for (std::size_t i = 0; i < n; ++i) {
      const double gm = params_.gamma[dots[i]];
      if (gm <= 0.0) continue;
      Reservoir r{i, gm, specs_[dots[i]], {}};
      r.base = base_integrals(b.a, r.spec);
      b.res.push_back(std::move(r));
    }
    return b;
  }

  /// G(e) = (A + i e)^{-1}.
  static ComplexMatrix resolvent(const ComplexMatrix& a, cplx e) {
    ComplexMatrix m = a;
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) += cplx(0.0, 1.0) * e;
    if (m.rows() == 1) return ComplexMatrix::Constant(1, 1, 1.0 / m(0, 0));
    const cplx det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    ComplexMatrix inv(2, 2);
    inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return inv / det;
  }

  std::vector<cplx> base_integrals(const ComplexMatrix& a, const ReservoirSpec& spec) const {
    const auto n = static_cast<std::size_t>(a.rows());
    std::vector<cplx> out(n * n * n);
    if (spec.occupation) {
      // constant occupation: Int de/2pi G X G^H = W with A W + W A^H = -X
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          ComplexMatrix x = ComplexMatrix::Zero(n, n);
          x(k, l) = -1.0;
          const ComplexMatrix w = linalg::solve_lyapunov(a, x);
          for (std::size_t j = 0; j < n; ++j) out[idx(n, j, k, l)] = *spec.occupation * w(j, j);
        }
      return out;
    }
    auto integrand = [&](double e) -> quad::Vec {
      quad::Vec v(static_cast<Eigen::Index>(n * n * n));
      const double f = fermi(e, spec);
      if (f == 0.0) return quad::Vec::Zero(v.size());
      const ComplexMatrix g = resolvent(a, e);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t l = 0; l < n; ++l)
            v(idx(n, j, k, l)) = f * g(j, k) * std::conj(g(j, l)) / (2.0 * M_PI);
      return v;
    };
    const double c = centre(), w = window_;
    // breakpoints graded geometrically around every feature (poles, Fermi edge) so
    // that no initial panel is much wider than its distance to a feature
    std::vector<std::pair<double, double>> features;
    const ComplexVector lam = a.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      features.emplace_back(-lam(i).imag(), std::max(std::abs(lam(i).real()), 1e-12 * w));
    if (!spec.zero_temperature) features.emplace_back(spec.mu, spec.temperature);
    else features.emplace_back(spec.mu, w * 1e-12);
    std::vector<double> cuts{c - w, c + w};
    for (const auto& [x0, width] : features) {
      cuts.push_back(x0);
      for (double d = 0.25 * width; d < 2.0 * w; d *= 2.0) {
        cuts.push_back(x0 - d);
        cuts.push_back(x0 + d);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    quad::Options core{std::min(q_.abs_tol * 1e-3, 1e-12), 1e-13, q_.max_panels, 0.0};
    quad::Vec sum = quad::integrate_lower_tail(integrand, c, w, core).value;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = std::max(cuts[i], c - w), hi = std::min(cuts[i + 1], c + w);
      if (hi > lo) sum += quad::integrate(integrand, lo, hi, core).value;
    }
    if (!spec.zero_temperature) sum += quad::integrate_upper_tail(integrand, c, w, core).value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sum(static_cast<Eigen::Index>(i));
    return out;
  }

  /// Sum_kl E_km conj(E_lm) B_jkl - 2 Re Sum_k E_km C_jk(tau) for reservoir m.
  std::vector<double> residue_deviation(const Block& b, const Reservoir& r, double tau) const {
    const auto n = b.dots.size();
    const std::size_t m = r.local;
    const ComplexMatrix e = linalg::expm(b.a, tau);
    const ComplexMatrix c = cross_term(b.a, r, tau);
    std::vector<double> out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) s += e(k, m) * std::conj(e(l, m)) * r.base[idx(n, j, k, l)];
      cplx x = 0.0;
      for (std::size_t k = 0; k < n; ++k) x += e(k, m) * c(j, k);
      out[j] = s.real() - 2.0 * x.real();
    }
    return out;
  }

  /// C_jk(tau) = Int de/2pi f(e) e^{i e tau} G_jk(e) conj(G_jm(e)), closed in the
  /// upper half plane. conj(G) continues to i (z - M)^{-1} with M = -i conj(A), whose
  /// poles contribute -[h_jk(M)]_jm with h_jk(z) = f(z) e^{i z tau} G_jk(z); the
  /// Fermi poles z_n = mu + i pi T (2n+1) contribute residue -T each.
  ComplexMatrix cross_term(const ComplexMatrix& a, const Reservoir& r, double tau) const {
    const auto n = a.rows();
    const std::size_t m = r.local;
    const cplx i(0.0, 1.0);
    const ReservoirSpec& spec = r.spec;
    auto hfun = [&](cplx z) -> ComplexMatrix { return fermi(z, spec) * std::exp(i * z * tau) * resolvent(a, z); };
    auto hder = [&](cplx z) -> ComplexMatrix {
      const ComplexMatrix g = resolvent(a, z);
      const cplx f = fermi(z, spec), ph = std::exp(i * z * tau);
      return (fermi_derivative(z, spec) + i * tau * f) * ph * g - i * f * ph * (g * g);
    };

    ComplexMatrix c = ComplexMatrix::Zero(n, n);
    const ComplexMatrix mm = -i * a.conjugate();
    if (n == 1) {
      c(0, 0) = -hfun(mm(0, 0))(0, 0);
    } else {
      Eigen::ComplexSchur<ComplexMatrix> schur(mm);
      const ComplexMatrix& q = schur.matrixU();
      const ComplexMatrix& t = schur.matrixT();
      const cplx t1 = t(0, 0), t2 = t(1, 1);
      const ComplexMatrix h1 = hfun(t1), h2 = hfun(t2);
      const double len = tau + 1.0 / std::max(std::abs(t1.imag()), 1e-300) +
                         (spec.occupation ? 0.0 : 1.0 / (M_PI * spec.temperature));
      ComplexMatrix dd;
      if (std::abs(t1 - t2) * len < 1e-5) dd = hder(0.5 * (t1 + t2));
      else dd = (h1 - h2) / (t1 - t2);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
          ComplexMatrix ht(2, 2);
          ht << h1(j, k), t(0, 1) * dd(j, k), 0.0, h2(j, k);
          const ComplexMatrix hm = q * ht * q.adjoint();
          c(j, k) = -hm(j, static_cast<Eigen::Index>(m));
        }
    }
    if (!spec.occupation) {
      const double temp = spec.temperature;
      const double step = 2.0 * M_PI * temp * tau;
      const std::size_t terms = static_cast<std::size_t>(std::ceil(45.0 / step)) + 2;
      if (terms > 10'000'000) throw NumericalError("Matsubara sum too long; use the time-domain path");
      ComplexMatrix sum = ComplexMatrix::Zero(n, n);
      const ComplexMatrix abar = a.conjugate();
      for (std::size_t k = 0; k < terms; ++k) {
        const cplx z(spec.mu, M_PI * temp * (2.0 * double(k) + 1.0));
        const ComplexMatrix g = resolvent(a, z);
        const ComplexMatrix gb = resolvent(abar, -z);  // (conj(A) - i z)^{-1}
        const cplx w = -temp * std::exp(i * z * tau);
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index kk = 0; kk < n; ++kk) sum(j, kk) += w * g(j, kk) * gb(j, static_cast<Eigen::Index>(m));
      }
      c += i * sum;
    }
    return c;
  }

  /// Int_0^tau du Int_0^tau dv D_jm(u) conj(D_jm(v)) F(u - v), F the Fourier
  /// transform of the occupation, reduced to (1/2 or c) Int |D_jm|^2 plus the
  /// principal-value part over u > v with kernel T/sinh(pi T s) (1/(pi s) at T = 0).
  std::vector<double> td_noise(const Block& b, const Reservoir& r, double tau) const {
    const auto n = b.dots.size();
    const std::size_t m = r.local;
    std::vector<double> out(n, 0.0);
    if (tau == 0.0) return out;
    const ReservoirSpec& spec = r.spec;
    const bool fermi_like = !spec.occupation;
    const double temp = spec.zero_temperature ? 0.0 : spec.temperature;

    const ComplexVector lam = b.a.eigenvalues();
    double omega = std::abs(spec.mu - centre()) + 1e-3;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      omega = std::max(omega, std::abs(lam(i) + cplx(0.0, fermi_like ? spec.mu : 0.0)));
    if (fermi_like) omega = std::max(omega, M_PI * temp);
    const double hmax = 2.0 / omega;
    const std::size_t panels = static_cast<std::size_t>(std::ceil(tau / hmax));
    if (panels * panels > 4 * q_.max_panels * 100)
      throw NumericalError("time-domain quadrature: horizon too long for max_panels");
    const double h = tau / double(panels);
    constexpr int kq = 20;
    std::vector<double> x, w;
    quad::gauss_legendre(kq, x, w);

    std::vector<double> un(panels * kq), uw(panels * kq);
    std::vector<ComplexVector> dcol(panels * kq);  // D(u)[:, m]
    for (std::size_t p = 0; p < panels; ++p)
      for (int i = 0; i < kq; ++i) {
        const std::size_t id = p * kq + i;
        un[id] = h * (double(p) + 0.5 * (x[i] + 1.0));
        uw[id] = 0.5 * h * w[i];
        dcol[id] = detail::small_exp(b.a, un[id]).col(static_cast<Eigen::Index>(m));
      }
    const double weight = fermi_like ? 0.5 : *spec.occupation;
    for (std::size_t id = 0; id < un.size(); ++id)
      for (std::size_t j = 0; j < n; ++j) out[j] += weight * uw[id] * std::norm(dcol[id](j));
    if (!fermi_like) return out;

    auto kernel = [&](double s) {
      if (temp == 0.0) return 1.0 / (M_PI * s);
      const double y = M_PI * temp * s;
      return y > 700.0 ? 0.0 : temp / std::sinh(y);
    };
    auto add = [&](double u, const ComplexVector& du, double v, const ComplexVector& dv, double wt) {
      const double s = u - v;
      const double k = kernel(s) * wt;
      if (k == 0.0) return;
      const cplx ph = std::exp(cplx(0.0, spec.mu * s));
      for (std::size_t j = 0; j < n; ++j) out[j] += k * std::imag(du(j) * std::conj(dv(j)) * ph);
    };
    const double reach = temp > 0.0 ? 45.0 / (M_PI * temp) : tau + h;
    for (std::size_t pa = 0; pa < panels; ++pa) {
      for (std::size_t pb = 0; pb < pa; ++pb) {
        if (double(pa - pb - 1) * h > reach) continue;
        for (int i = 0; i < kq; ++i)
          for (int k = 0; k < kq; ++k) {
            const std::size_t ia = pa * kq + i, ib = pb * kq + k;
            add(un[ia], dcol[ia], un[ib], dcol[ib], uw[ia] * uw[ib]);
          }
      }
      // triangle v in (u0, u) inside the diagonal panel
      const double u0 = h * double(pa);
      for (int i = 0; i < kq; ++i) {
        const std::size_t ia = pa * kq + i;
        const double span = un[ia] - u0;
        for (int k = 0; k < kq; ++k) {
          const double v = u0 + span * 0.5 * (x[k] + 1.0);
          const ComplexVector dv = detail::small_exp(b.a, v).col(static_cast<Eigen::Index>(m));
          add(un[ia], dcol[ia], v, dv, uw[ia] * span * 0.5 * w[k]);
        }
      }
    }
    return out;
  }

  std::vector<double> td_deviation(const Block& b, const Reservoir& r, double tau) const {
    auto v = td_noise(b, r, tau);
    for (std::size_t j = 0; j < b.dots.size(); ++j)
      v[j] -= std::real(r.base[idx(b.dots.size(), j, r.local, r.local)]);
    return v;
  }

  ChainParams params_;
  std::vector<ReservoirSpec> specs_;
  QuadratureSettings q_;
  Method method_;
  ComplexMatrix a_;
  double window_ = 0.0;
  std::vector<Block> blocks_;
};

/// <N_1(t)>, <N_2(t)> for a single time.
inline std::vector<double> transient_populations(const ChainParams& p, const std::vector<ReservoirSpec>& specs,
                                                 const InitialConditions& init, double t, double t0 = 0.0,
                                                 const QuadratureSettings& q = {}) {
  if (t < t0) throw ConfigError("populations: t must not precede t0");
  return PopulationSolver(p, specs, q).populations(init, t - t0);
}

inline std::vector<double> steady_state_populations(const ChainParams& p, const std::vector<ReservoirSpec>& specs,
                                                    const QuadratureSettings& q = {}) {
  return PopulationSolver(p, specs, q).steady_state();
}

}  // namespace epd::he
