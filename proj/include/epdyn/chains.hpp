#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"
#include "epdyn/linalg.hpp"
#include "epdyn/lindblad.hpp"
#include "epdyn/model.hpp"

namespace epd::chains {

struct ChainSpectrum {
  std::vector<cplx> eigenvalues;   // spectral order
  std::vector<double> eta_squared; // signed eta_N^(j)^2, j = 1..floor(N/2)
  std::vector<cplx> eta_values;    // principal roots of eta_squared
  std::vector<double> ep_couplings;
};

/// Tridiagonal N x N evolution matrix: diagonal -(G_j/2 + i e_j), off-diagonals -i g.
inline ComplexMatrix build_chain_A(const ChainParams& p) {
  if (p.n_dots < 2) throw ConfigError("build_chain_A: at least two dots required");
  if (p.eps.size() != p.n_dots || p.gamma.size() != p.n_dots) throw ConfigError("build_chain_A: length mismatch");
  const auto n = static_cast<Eigen::Index>(p.n_dots);
  const cplx i(0.0, 1.0);
  ComplexMatrix a = ComplexMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    a(j, j) = -(p.gamma[static_cast<std::size_t>(j)] / 2.0 + i * p.eps[static_cast<std::size_t>(j)]);
    if (j + 1 < n) a(j, j + 1) = a(j + 1, j) = -i * p.g;
  }
  return a;
}

inline bool is_alternating(const ChainParams& p) {
  for (std::size_t j = 0; j < p.gamma.size(); ++j)
    if (p.gamma[j] != p.gamma[j % 2]) return false;
  return p.gamma.size() >= 2 && p.is_resonant();
}

/// Couplings where eta_N^(j) vanishes, g_j = |G1 - G2| / (8 cos(j pi / (N+1))), ascending.
/// Empty for G1 = G2 (uniform Toeplitz chain).
inline std::vector<double> closed_form_ep_couplings(std::size_t n, double gamma1, double gamma2) {
  std::vector<double> out;
  if (gamma1 == gamma2) return out;
  for (std::size_t j = 1; j <= n / 2; ++j) {
    const double c = std::cos(double(j) * M_PI / double(n + 1));
    if (c > 0.0) out.push_back(std::abs(gamma1 - gamma2) / (8.0 * c));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Closed-form spectrum of the alternating chain (G1, G2, G1, ...):
/// {-i e - G/4 +- eta_N^(j)}, eta^2 = -4 g^2 cos^2(j pi/(N+1)) + ((G1 - G2)/4)^2,
/// plus -G1/2 - i e for odd N.
inline ChainSpectrum closed_form_spectrum(std::size_t n, double gamma1, double gamma2, double g, double eps_d) {
  if (n < 2) throw ConfigError("closed_form_spectrum: N must be at least 2");
  ChainSpectrum s;
  const cplx i(0.0, 1.0);
  const double d = (gamma1 - gamma2) / 4.0;
  const cplx centre = -i * eps_d - (gamma1 + gamma2) / 4.0;
  for (std::size_t j = 1; j <= n / 2; ++j) {
    const double c = std::cos(double(j) * M_PI / double(n + 1));
    const double e2 = -4.0 * g * g * c * c + d * d;
    const cplx eta = e2 >= 0.0 ? cplx(std::sqrt(e2), 0.0) : cplx(0.0, std::sqrt(-e2));
    s.eta_squared.push_back(e2);
    s.eta_values.push_back(eta);
    s.eigenvalues.push_back(centre + eta);
    s.eigenvalues.push_back(centre - eta);
  }
  if (n % 2 == 1) s.eigenvalues.push_back(-gamma1 / 2.0 - i * eps_d);
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), linalg::spectral_order);
  s.ep_couplings = closed_form_ep_couplings(n, gamma1, gamma2);
  return s;
}

inline ChainSpectrum closed_form_spectrum(const ChainParams& p) {
  if (!is_alternating(p)) throw ConfigError("no closed form; use numerical path (rates not alternating or dots detuned)");
  return closed_form_spectrum(p.n_dots, p.gamma[0], p.gamma[1], p.g, p.eps[0]);
}

inline ChainParams alternating_chain(std::size_t n, double gamma1, double gamma2, double g, double eps_d) {
  std::vector<double> gamma(n);
  for (std::size_t j = 0; j < n; ++j) gamma[j] = (j % 2 == 0) ? gamma1 : gamma2;
  return ChainParams::resonant(std::move(gamma), g, eps_d);
}

/// Largest |closed form - numerical| after multiset matching.
inline double max_spectrum_deviation(const std::vector<cplx>& closed, const ComplexVector& numerical) {
  const auto c = me::contains(numerical, closed, std::numeric_limits<double>::infinity());
  return c.max_distance;
}

struct EpCoupling {
  double g;
  std::size_t block_size;  // largest Jordan block found at this coupling
};

/// EP couplings of the alternating chain, each confirmed by the Jordan-structure estimator.
inline std::vector<EpCoupling> ep_couplings(std::size_t n, double gamma1, double gamma2) {
  std::vector<EpCoupling> out;
  for (double g : closed_form_ep_couplings(n, gamma1, gamma2)) {
    const auto js = linalg::jordan_structure(build_chain_A(alternating_chain(n, gamma1, gamma2, g, 0.0)));
    std::size_t b = 0;
    for (const auto& c : js.clusters) b = std::max(b, c.largest_block());
    out.push_back({g, b});
  }
  return out;
}

struct ThreeDotReport {
  std::vector<cplx> expected;   // -3G/4 - G1/2 +- eta3, -G/4 - G1/2 +- eta3
  std::vector<cplx> nearest;
  double max_distance = 0.0;
  double tolerance = 0.0;
  bool contained = false;
  double eta3_squared = 0.0;    // ((G1 - G2)/4)^2 - 2 g^2
  bool he_defective = false;
  bool me_defective = false;
  bool consistent() const { return contained && he_defective == me_defective; }
};

/// Checks four Liouvillian eigenvalues of the three-dot chain (G1, G2, G1) and
/// whether the HE and ME defectivity agree.
inline ThreeDotReport three_dot_liouvillian_check(double gamma1, double gamma2, double g, double eps_d,
                                                  const std::vector<ReservoirSpec>& specs) {
  const ChainParams p = alternating_chain(3, gamma1, gamma2, g, eps_d);
  const me::Liouvillian l = me::build_liouvillian(p, specs);
  ThreeDotReport r;
  const double gt = gamma1 + gamma2, d = (gamma1 - gamma2) / 4.0;
  r.eta3_squared = d * d - 2.0 * g * g;
  const cplx eta3 = std::sqrt(cplx(r.eta3_squared, 0.0));
  const double a = -3.0 * gt / 4.0 - gamma1 / 2.0, b = -gt / 4.0 - gamma1 / 2.0;
  r.expected = {a + eta3, a - eta3, b + eta3, b - eta3};
  const ComplexVector spectrum = me::liouvillian_spectrum(l).eigenvalues;
  r.tolerance = 1e-8 * l.matrix.norm();
  const auto c = me::contains(spectrum, r.expected, r.tolerance);
  r.contained = c.contained;
  r.nearest = c.nearest;
  r.max_distance = c.max_distance;

  const auto js = linalg::jordan_structure(build_chain_A(p));
  r.he_defective = js.defective();
  const double radius = 1e-4 * std::max(gt, 1e-300);
  r.me_defective = me::sector_block_near(l, a, radius) >= 2 || me::sector_block_near(l, b, radius) >= 2;
  return r;
}

}  // namespace epd::chains
