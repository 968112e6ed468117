#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"

namespace epd {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace linalg {

inline constexpr std::size_t kDefaultDimCap = 4096;
inline constexpr std::size_t kJordanDimCap = 64;

/// One eigenvalue cluster and the Jordan block sizes found on it (descending).
struct JordanCluster {
  cplx eigenvalue;
  std::vector<std::size_t> block_sizes;

  std::size_t multiplicity() const {
    return std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0});
  }
  std::size_t largest_block() const {
    return block_sizes.empty() ? 0 : *std::max_element(block_sizes.begin(), block_sizes.end());
  }
  bool defective() const { return largest_block() > 1; }
};

struct JordanStructure {
  std::vector<JordanCluster> clusters;
  std::vector<std::string> warnings;

  bool defective() const {
    return std::any_of(clusters.begin(), clusters.end(),
                       [](const JordanCluster& c) { return c.defective(); });
  }
  /// Largest block among clusters within `radius` of `lambda`; 0 if none.
  std::size_t largest_block_near(cplx lambda, double radius) const {
    std::size_t best = 0;
    for (const auto& c : clusters)
      if (std::abs(c.eigenvalue - lambda) <= radius) best = std::max(best, c.largest_block());
    return best;
  }
};

struct SpectralDecomposition {
  ComplexVector eigenvalues;
  ComplexMatrix right_eigenvectors;  // columns, unit 2-norm
  double condition_estimate = 1.0;   // 2-norm condition of the eigenvector matrix
  std::vector<JordanCluster> jordan_blocks;
  bool structure_estimated = false;  // false when dim exceeds the Jordan-analysis cap
  std::vector<std::string> warnings;
};

inline void check_dim(const ComplexMatrix& a, std::size_t cap, const char* who) {
  if (a.rows() != a.cols()) throw NumericalError(std::string(who) + ": matrix is not square");
  if (static_cast<std::size_t>(a.rows()) > cap)
    throw NumericalError(std::string(who) + ": dimension " + std::to_string(a.rows()) +
                         " exceeds cap " + std::to_string(cap));
  if (!a.allFinite()) throw NumericalError(std::string(who) + ": non-finite entries");
}

/// Order used for every reported spectrum: real part descending, then imaginary part ascending.
inline bool spectral_order(cplx a, cplx b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() < b.imag();
}

inline ComplexVector sorted_eigenvalues(ComplexVector v) {
  std::sort(v.data(), v.data() + v.size(), spectral_order);
  return v;
}

inline double condition_number(const ComplexMatrix& v) {
  Eigen::BDCSVD<ComplexMatrix> svd(v);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

namespace detail {

inline std::size_t nullity(const ComplexMatrix& m, double threshold) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) <= threshold) ++k;
  return k;
}

/// Single-linkage grouping of `idx` (indices into `ev`) at the given radius.
inline std::vector<std::vector<std::size_t>> link_clusters(const ComplexVector& ev,
                                                          const std::vector<std::size_t>& idx,
                                                          double radius) {
  std::vector<int> label(idx.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (label[i] >= 0) continue;
    label[i] = next;
    std::vector<std::size_t> stack{i};
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q = 0; q < idx.size(); ++q)
        if (label[q] < 0 && std::abs(ev(idx[p]) - ev(idx[q])) <= radius) {
          label[q] = next;
          stack.push_back(q);
        }
    }
    ++next;
  }
  std::vector<std::vector<std::size_t>> out(next);
  for (std::size_t i = 0; i < idx.size(); ++i) out[label[i]].push_back(idx[i]);
  return out;
}

/// Block sizes from the nullities of (A - cI)^k, k = 1..m. Empty if the
/// generalized null space does not account for all m clustered eigenvalues.
inline std::vector<std::size_t> block_sizes_from_ranks(const ComplexMatrix& a, cplx c, std::size_t m,
                                                       double tol, double scale) {
  const auto n = a.rows();
  const ComplexMatrix shifted = a - c * ComplexMatrix::Identity(n, n);
  ComplexMatrix power = ComplexMatrix::Identity(n, n);
  std::vector<std::size_t> null(m + 1, 0);
  for (std::size_t k = 1; k <= m; ++k) {
    power = power * shifted;
    null[k] = std::max(null[k - 1], std::min(m, nullity(power, tol * std::pow(scale, double(k)))));
  }
  if (null[m] < m) return {};
  // number of blocks of size >= k is null[k] - null[k-1]
  std::vector<std::size_t> at_least(m + 2, 0);
  for (std::size_t k = 1; k <= m; ++k) at_least[k] = null[k] - null[k - 1];
  for (std::size_t k = 1; k < m; ++k)
    if (at_least[k + 1] > at_least[k]) return {};
  std::vector<std::size_t> sizes;
  for (std::size_t k = m; k >= 1; --k) {
    const std::size_t exactly = at_least[k] - std::min(at_least[k], at_least[k + 1]);
    for (std::size_t i = 0; i < exactly; ++i) sizes.push_back(k);
  }
  return sizes;
}

}  // namespace detail

/// Jordan structure of a small matrix from its eigenvalues and rank deficiencies.
///
/// Eigenvalues are first grouped with a wide radius, because a defective
/// cluster of order k splits under rounding by roughly eps^(1/k). A group is
/// accepted when the generalized null space of (A - cI)^m at its centroid has
/// the full dimension m, i.e. A lies within `cluster_tol`*|A| of a matrix with
/// that Jordan structure. Rejected groups are re-split with a tighter radius
/// down to `cluster_tol`*|A|.
inline JordanStructure jordan_structure(const ComplexMatrix& a, double cluster_tol = 1e-8) {
  check_dim(a, kJordanDimCap, "jordan_structure");
  JordanStructure out;
  const auto n = static_cast<std::size_t>(a.rows());
  if (n == 0) return out;
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, false);
  if (solver.info() != Eigen::Success)
    throw NumericalError("jordan_structure: eigenvalue iteration did not converge");
  const ComplexVector ev = solver.eigenvalues();
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  const double finest = cluster_tol * scale;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  auto recurse = [&](auto&& self, const std::vector<std::size_t>& idx, double radius) -> void {
    for (const auto& group : detail::link_clusters(ev, idx, radius)) {
      if (group.size() == 1) {
        out.clusters.push_back({ev(group[0]), {1}});
        continue;
      }
      cplx centroid = 0.0;
      for (auto i : group) centroid += ev(i);
      centroid /= static_cast<double>(group.size());
      auto sizes = detail::block_sizes_from_ranks(a, centroid, group.size(), cluster_tol, scale);
      if (!sizes.empty()) {
        out.clusters.push_back({centroid, std::move(sizes)});
      } else if (radius * 0.1 >= finest) {
        self(self, group, radius * 0.1);
      } else {
        out.warnings.push_back("ambiguous cluster near " + std::to_string(centroid.real()) + "+" +
                               std::to_string(centroid.imag()) + "i treated as distinct eigenvalues");
        for (auto i : group) out.clusters.push_back({ev(i), {1}});
      }
    }
  };
  recurse(recurse, all, 1e-3 * scale);

  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const JordanCluster& x, const JordanCluster& y) {
              return spectral_order(x.eigenvalue, y.eigenvalue);
            });
  for (std::size_t i = 0; i + 1 < out.clusters.size(); ++i)
    for (std::size_t j = i + 1; j < out.clusters.size(); ++j)
      if (std::abs(out.clusters[i].eigenvalue - out.clusters[j].eigenvalue) <= 2.0 * finest)
        out.warnings.push_back("clusters closer than twice the clustering tolerance");
  return out;
}

/// Full eigendecomposition of a dense complex matrix (Hessenberg reduction + shifted QR).
inline SpectralDecomposition eigendecompose(const ComplexMatrix& a, double tol = 1e-8,
                                            std::size_t cap = kDefaultDimCap) {
  check_dim(a, cap, "eigendecompose");
  SpectralDecomposition out;
  const auto n = a.rows();
  Eigen::ComplexEigenSolver<ComplexMatrix> solver;
  solver.setMaxIterations(static_cast<Eigen::Index>(60 * std::max<Eigen::Index>(n, 1)));
  solver.compute(a, true);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecompose: QR iteration did not converge within " +
                         std::to_string(60 * n) + " iterations");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const ComplexVector& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return spectral_order(ev(i), ev(j)); });
  out.eigenvalues.resize(n);
  out.right_eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = ev(order[k]);
    out.right_eigenvectors.col(k) = solver.eigenvectors().col(order[k]).normalized();
  }
  out.condition_estimate = condition_number(out.right_eigenvectors);

  if (static_cast<std::size_t>(n) <= kJordanDimCap) {
    auto js = jordan_structure(a, tol);
    out.jordan_blocks = std::move(js.clusters);
    out.warnings = std::move(js.warnings);
    out.structure_estimated = true;
  } else {
    for (Eigen::Index k = 0; k < n; ++k) out.jordan_blocks.push_back({out.eigenvalues(k), {1}});
  }
  return out;
}

/// max_i |A v_i - lambda_i v_i| over the listed eigenpairs.
inline double max_residual(const ComplexMatrix& a, const SpectralDecomposition& sd) {
  double r = 0.0;
  for (Eigen::Index k = 0; k < sd.eigenvalues.size(); ++k) {
    const ComplexVector v = sd.right_eigenvectors.col(k);
    r = std::max(r, (a * v - sd.eigenvalues(k) * v).norm());
  }
  return r;
}

/// e^{A t} by scaling and squaring with a degree-13 Pade approximant
/// (Higham's 2005 parameters). Throws on overflow.
inline ComplexMatrix expm(const ComplexMatrix& a, double t = 1.0) {
  check_dim(a, kDefaultDimCap, "expm");
  const auto n = a.rows();
  const ComplexMatrix ident = ComplexMatrix::Identity(n, n);
  if (t == 0.0 || n == 0) return ident;
  if (!std::isfinite(t)) throw NumericalError("expm: non-finite time");

  const ComplexMatrix x = a * t;
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw NumericalError("expm: overflow in t*A");
  if (norm1 == 0.0) return ident;

  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  auto pade = [&](const ComplexMatrix& m, int degree) -> ComplexMatrix {
    const ComplexMatrix m2 = m * m;
    ComplexMatrix u, v;
    if (degree == 13) {
      const ComplexMatrix m4 = m2 * m2, m6 = m4 * m2;
      u = m * (m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2) + b[7] * m6 + b[5] * m4 + b[3] * m2 +
               b[1] * ident);
      v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2) + b[6] * m6 + b[4] * m4 + b[2] * m2 +
          b[0] * ident;
    } else {
      // lower-degree approximants share the same structure with their own coefficients
      static constexpr double c3[] = {120.0, 60.0, 12.0, 1.0};
      static constexpr double c5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
      static constexpr double c7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                      25200.0,    1512.0,    56.0,      1.0};
      static constexpr double c9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                      30270240.0,    2162160.0,    110880.0,     3960.0,
                                      90.0,          1.0};
      const double* c = degree == 3 ? c3 : degree == 5 ? c5 : degree == 7 ? c7 : c9;
      ComplexMatrix pw = ident;
      ComplexMatrix uu = c[1] * ident, vv = c[0] * ident;
      for (int k = 2; k <= degree; k += 2) {
        pw = pw * m2;
        vv += c[k] * pw;
        uu += c[k + 1] * pw;
      }
      u = m * uu;
      v = vv;
    }
    return (v - u).partialPivLu().solve(v + u);
  };

  static constexpr double theta[] = {1.495585217958292e-2, 2.539398330063230e-1,
                                     9.504178996162932e-1, 2.097847961257068e0};
  static constexpr int degrees[] = {3, 5, 7, 9};
  for (int i = 0; i < 4; ++i)
    if (norm1 <= theta[i]) return pade(x, degrees[i]);

  constexpr double theta13 = 5.371920351148152;
  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  if (s > 1000) throw NumericalError("expm: t*|A| too large");
  ComplexMatrix r = pade(x / std::ldexp(1.0, s), 13);
  for (int k = 0; k < s; ++k) {
    r = r * r;
    if (!r.allFinite()) throw NumericalError("expm: overflow during squaring");
  }
  if (!r.allFinite()) throw NumericalError("expm: overflow");
  return r;
}

/// Solves A X + X A^H = C (continuous Lyapunov/Sylvester form) through the
/// Kronecker system; adequate for the small dot-space matrices.
inline ComplexMatrix solve_lyapunov(const ComplexMatrix& a, const ComplexMatrix& c) {
  const auto n = a.rows();
  const ComplexMatrix ident = ComplexMatrix::Identity(n, n);
  ComplexMatrix op = ComplexMatrix::Zero(n * n, n * n);
  // column-stacking: vec(A X) = (I kron A) vec X, vec(X A^H) = (conj(A) kron I) vec X
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      op.block(i * n, j * n, n, n) += ident(i, j) * a;
      op.block(i * n, j * n, n, n) += std::conj(a(i, j)) * ident;
    }
  const ComplexVector rhs = Eigen::Map<const ComplexVector>(c.data(), n * n);
  const ComplexVector sol = op.fullPivLu().solve(rhs);
  return Eigen::Map<const ComplexMatrix>(sol.data(), n, n);
}

}  // namespace linalg
}  // namespace epd
