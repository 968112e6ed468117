#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"
#include "epdyn/linalg.hpp"
#include "epdyn/model.hpp"
#include "epdyn/time_series.hpp"

// Finite-bath oracle. The single-particle Hamiltonian of dots plus discretised
// flat-band reservoirs is real symmetric, so it is stored and diagonalised as
// a real matrix (LAPACK dsyevd); propagators are then complex through e^{-iEt}.
// Mode ordering: dots 0..N-1, then the modes of bath 1, bath 2, ...

namespace epd::bath {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct DiscretizedBath {
  std::size_t dot = 0;  // dot the bath couples to
  double gamma = 0.0;
  double half_width = 0.0;
  std::vector<double> mode_energies;
  std::vector<double> amplitudes;  // t_k = sqrt(gamma * de / 2pi)
  ReservoirSpec spec;

  double spacing() const {
    return mode_energies.size() > 1 ? mode_energies[1] - mode_energies[0] : 2.0 * half_width;
  }
  double sum_sq_amplitudes() const {
    double s = 0.0;
    for (double t : amplitudes) s += t * t;
    return s;
  }
};

/// Uniform midpoint grid of `modes` levels over [centre - half_width, centre + half_width].
inline DiscretizedBath flat_bath(std::size_t dot, double gamma, double centre, double half_width, std::size_t modes,
                                 const ReservoirSpec& spec) {
  if (!(half_width > 0.0)) throw ConfigError("bath half-width must be positive");
  DiscretizedBath b;
  b.dot = dot;
  b.gamma = gamma;
  b.half_width = half_width;
  b.spec = spec;
  if (modes == 0) return b;
  const double de = 2.0 * half_width / double(modes);
  const double amp = std::sqrt(gamma * de / (2.0 * M_PI));
  for (std::size_t k = 0; k < modes; ++k) {
    b.mode_energies.push_back(centre - half_width + (double(k) + 0.5) * de);
    b.amplitudes.push_back(amp);
  }
  return b;
}

inline std::size_t total_dimension(const ChainParams& p, const std::vector<DiscretizedBath>& baths) {
  std::size_t n = p.n_dots;
  for (const auto& b : baths) n += b.mode_energies.size();
  return n;
}

/// Dot block (eps_j diagonal, g nearest-neighbour), bath diagonals eps_k and
/// dot-bath couplings t_k.
inline RealMatrix assemble_single_particle_H(const ChainParams& p, const std::vector<DiscretizedBath>& baths,
                                             std::size_t cap = 16384) {
  const std::size_t n = total_dimension(p, baths);
  if (n > cap) throw NumericalError("single-particle dimension " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  RealMatrix h = RealMatrix::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t j = 0; j < p.n_dots; ++j) {
    h(Eigen::Index(j), Eigen::Index(j)) = p.eps[j];
    if (j + 1 < p.n_dots) h(Eigen::Index(j), Eigen::Index(j + 1)) = h(Eigen::Index(j + 1), Eigen::Index(j)) = p.g;
  }
  Eigen::Index off = Eigen::Index(p.n_dots);
  for (const auto& b : baths) {
    if (b.dot >= p.n_dots) throw ConfigError("bath attached to a missing dot");
    for (std::size_t k = 0; k < b.mode_energies.size(); ++k) {
      const Eigen::Index r = off + Eigen::Index(k);
      h(r, r) = b.mode_energies[k];
      h(r, Eigen::Index(b.dot)) = h(Eigen::Index(b.dot), r) = b.amplitudes[k];
    }
    off += Eigen::Index(b.mode_energies.size());
  }
  return h;
}

/// y = H x without forming H.
inline RealVector apply_H(const ChainParams& p, const std::vector<DiscretizedBath>& baths, const RealVector& x) {
  RealVector y = RealVector::Zero(x.size());
  const Eigen::Index nd = Eigen::Index(p.n_dots);
  for (Eigen::Index j = 0; j < nd; ++j) {
    y(j) += p.eps[std::size_t(j)] * x(j);
    if (j + 1 < nd) {
      y(j) += p.g * x(j + 1);
      y(j + 1) += p.g * x(j);
    }
  }
  Eigen::Index off = nd;
  for (const auto& b : baths) {
    const Eigen::Index d = Eigen::Index(b.dot);
    for (std::size_t k = 0; k < b.mode_energies.size(); ++k) {
      const Eigen::Index r = off + Eigen::Index(k);
      y(r) += b.mode_energies[k] * x(r) + b.amplitudes[k] * x(d);
      y(d) += b.amplitudes[k] * x(r);
    }
    off += Eigen::Index(b.mode_energies.size());
  }
  return y;
}

struct Eigensystem {
  RealVector energies;
  RealMatrix vectors;  // columns
  std::string solver;
};

/// Full eigendecomposition of a real symmetric matrix (LAPACK dsyevd, in place).
inline Eigensystem symmetric_eigensystem(RealMatrix h) {
  const lapack_int n = static_cast<lapack_int>(h.rows());
  Eigensystem es;
  es.solver = "dsyevd";
  es.energies.resize(n);
  if (n > 0) {
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, h.data(), n, es.energies.data());
    if (info != 0) throw NumericalError("symmetric eigensolver failed (info " + std::to_string(info) + ")");
  }
  es.vectors = std::move(h);
  return es;
}

inline Eigensystem reference_eigensystem(const RealMatrix& h) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("reference eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors(), "eigen"};
}

/// Relative residual of H V y = V E y and V^T V y = y for a fixed pseudo-random y; O(n^2).
inline double probe_residual(const ChainParams& p, const std::vector<DiscretizedBath>& baths, const Eigensystem& es) {
  const Eigen::Index n = es.energies.size();
  if (n == 0) return 0.0;
  RealVector y(n);
  std::uint64_t s = 0x9e3779b97f4a7c15ULL;
  for (Eigen::Index k = 0; k < n; ++k) {
    s ^= s << 13; s ^= s >> 7; s ^= s << 17;
    y(k) = double(s >> 11) * 0x1.0p-53 - 0.5;
  }
  const RealVector z = es.vectors * y;
  const RealVector r = apply_H(p, baths, z) - es.vectors * es.energies.cwiseProduct(y);
  const double scale = std::max(es.energies.cwiseAbs().maxCoeff(), 1.0) * y.norm();
  return std::max(r.norm() / scale, (es.vectors.transpose() * z - y).norm() / y.norm());
}

/// LAPACK path with a residual probe; a faulty BLAS build falls back to Eigen's solver.
inline Eigensystem verified_eigensystem(const ChainParams& p, const std::vector<DiscretizedBath>& baths) {
  Eigensystem es = symmetric_eigensystem(assemble_single_particle_H(p, baths));
  const double tol = 1e-10;
  if (probe_residual(p, baths, es) <= tol) return es;
  es = reference_eigensystem(assemble_single_particle_H(p, baths));
  if (probe_residual(p, baths, es) > tol) throw NumericalError("eigendecomposition failed the residual probe");
  es.solver = "eigen (LAPACK result rejected by residual probe)";
  return es;
}

/// Correlation matrix C_pq = <a_p^dag a_q> of a Gaussian state.
struct CorrelationMatrix {
  ComplexMatrix c;

  double trace() const { return c.trace().real(); }
  double hermiticity() const { return (c - c.adjoint()).cwiseAbs().maxCoeff(); }
  std::pair<double, double> eigen_range() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (c + c.adjoint()), Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }
};

/// Factorised initial state: dot occupations on the diagonal, f(e_k) on each bath mode.
inline RealVector initial_occupations(const ChainParams& p, const std::vector<DiscretizedBath>& baths,
                                      const InitialConditions& init) {
  validate_initial(init, p.n_dots);
  RealVector occ(Eigen::Index(total_dimension(p, baths)));
  for (std::size_t j = 0; j < p.n_dots; ++j) occ(Eigen::Index(j)) = init.n[j];
  Eigen::Index off = Eigen::Index(p.n_dots);
  for (const auto& b : baths)
    for (double e : b.mode_energies) occ(off++) = fermi(e, b.spec);
  return occ;
}

/// C(t) = conj(U) C0 U^T with U = e^{-i H t} built from the eigensystem
/// (a_q(t) = sum_r U_qr a_r). Intended for moderate dimensions.
inline CorrelationMatrix evolve_correlations(const Eigensystem& es, const ComplexMatrix& c0, double t) {
  const Eigen::Index n = es.energies.size();
  if (c0.rows() != n || c0.cols() != n) throw ConfigError("evolve_correlations: dimension mismatch");
  if (t == 0.0) return {c0};
  ComplexVector ph(n);
  for (Eigen::Index k = 0; k < n; ++k) ph(k) = std::exp(cplx(0.0, -es.energies(k) * t));
  const ComplexMatrix v = es.vectors.cast<cplx>();
  const ComplexMatrix u = v * ph.asDiagonal() * v.transpose();
  return {u.conjugate() * c0 * u.transpose()};
}

/// Poincare recurrence scale of a uniform grid with spacing de.
inline double recurrence_horizon(double spacing) { return 2.0 * M_PI / spacing; }

/// Default bath half-width 100 max(G, T, |mu - e_d|).
inline double default_half_width(const ChainParams& p, const std::vector<ReservoirSpec>& specs) {
  double s = p.total_gamma();
  const double centre = p.eps.front();
  for (const auto& r : specs) {
    if (!r.occupation && !r.zero_temperature) s = std::max(s, r.temperature);
    if (!r.occupation) s = std::max(s, std::abs(r.mu - centre));
  }
  return 100.0 * s;
}

struct OracleSettings {
  std::size_t modes = 3000;  // per bath
  double half_width = 0.0;   // 0 = default_half_width
};

/// Dot populations C_jj(t) = sum_r |U_jr(t)|^2 C0_rr of the full finite system.
/// Channels N1, N2, ...; metadata records the recurrence horizon, M and W_b.
inline TimeSeries oracle_dot_populations(const ChainParams& p, const std::vector<ReservoirSpec>& specs,
                                         const InitialConditions& init, const TimeGrid& grid,
                                         OracleSettings settings = {}) {
  validate(p, specs);
  validate_initial(init, p.n_dots);
  validate_grid(grid);
  if (settings.modes == 0) throw ConfigError("oracle needs at least one mode per bath");
  const double wb = settings.half_width > 0.0 ? settings.half_width : default_half_width(p, specs);
  const double centre = p.eps.front();
  std::vector<DiscretizedBath> baths;
  for (std::size_t j = 0; j < p.n_dots; ++j)
    if (p.gamma[j] > 0.0) baths.push_back(flat_bath(j, p.gamma[j], centre, wb, settings.modes, specs[j]));
  const double de = 2.0 * wb / double(settings.modes);
  const double horizon = recurrence_horizon(de);
  if (grid.t_end - grid.t0 >= horizon && grid.steps > 1)
    throw ConfigError("oracle: t_end - t0 = " + std::to_string(grid.t_end - grid.t0) +
                      " reaches the recurrence horizon " + std::to_string(horizon) + "; increase the mode count M");

  const RealVector occ = initial_occupations(p, baths, init);
  const Eigensystem es = verified_eigensystem(p, baths);
  const Eigen::Index n = es.energies.size();
  const auto times = grid.times();
  const Eigen::Index nd = Eigen::Index(p.n_dots), nt = Eigen::Index(times.size());

  // U_jr(t) = sum_k V_jk V_rk e^{-i E_k t}: one real GEMM for every (dot, time) column
  RealMatrix w(n, 2 * nd * nt);
  for (Eigen::Index it = 0; it < nt; ++it)
    for (Eigen::Index j = 0; j < nd; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        const double ph = -es.energies(k) * (times[std::size_t(it)] - grid.t0);
        const Eigen::Index col = 2 * (it * nd + j);
        w(k, col) = es.vectors(j, k) * std::cos(ph);
        w(k, col + 1) = es.vectors(j, k) * std::sin(ph);
      }
  const RealMatrix u = es.vectors * w;

  TimeSeries ts;
  ts.t = times;
  ts.provenance = "oracle";
  for (Eigen::Index j = 0; j < nd; ++j) {
    std::vector<double> v(std::size_t(nt), 0.0);
    for (Eigen::Index it = 0; it < nt; ++it) {
      const Eigen::Index col = 2 * (it * nd + j);
      v[std::size_t(it)] = (u.col(col).array().square() + u.col(col + 1).array().square()).matrix().dot(occ);
    }
    ts.add_channel("N" + std::to_string(j + 1), std::move(v));
  }
  ts.metadata["recurrence_horizon"] = std::to_string(horizon);
  ts.metadata["modes_per_bath"] = std::to_string(settings.modes);
  ts.metadata["half_width"] = std::to_string(wb);
  ts.metadata["dimension"] = std::to_string(n);
  ts.metadata["eigensolver"] = es.solver;
  return ts;
}

}  // namespace epd::bath
