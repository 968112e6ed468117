#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"

namespace epd::quad {

using Vec = Eigen::VectorXcd;

struct Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-12;
  std::size_t max_panels = 2'000'000;
  double max_width = 0.0;  // 0 = uncapped; otherwise panels never exceed this width
};

struct Result {
  Vec value;
  double error = 0.0;
  std::size_t panels = 0;
};

namespace detail {

// 15-point Kronrod nodes (non-negative half) with the embedded 7-point Gauss rule.
inline constexpr double xk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                 0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                 0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  Vec value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Vec fc = f(c);
  Vec kron = wk[7] * fc;
  Vec gauss = wg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * xk[i];
    Vec s = f(c - dx) + f(c + dx);
    kron += wk[i] * s;
    if (i % 2 == 1) gauss += wg[i / 2] * s;
  }
  kron *= h;
  gauss *= h;
  const double err = (kron - gauss).cwiseAbs().maxCoeff();
  return {a, b, std::move(kron), err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) integration of a vector-valued
/// integrand over [a, b]. The panel with the largest error estimate is bisected
/// until the summed estimate meets max(abs_tol, rel_tol*|I|).
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt) {
  Result out;
  if (b <= a) {
    out.value = f(0.5 * (a + b)) * 0.0;
    return out;
  }
  std::size_t initial = 1;
  if (opt.max_width > 0.0) initial = static_cast<std::size_t>(std::ceil((b - a) / opt.max_width));
  if (initial > opt.max_panels)
    throw NumericalError("quadrature: oscillation cap needs " + std::to_string(initial) +
                         " panels, above max_panels");
  std::priority_queue<detail::Panel> heap;
  Vec total;
  double err = 0.0;
  for (std::size_t i = 0; i < initial; ++i) {
    const double lo = a + (b - a) * double(i) / double(initial);
    const double hi = (i + 1 == initial) ? b : a + (b - a) * double(i + 1) / double(initial);
    auto p = detail::gk15(f, lo, hi);
    if (i == 0) total = p.value;
    else total += p.value;
    err += p.error;
    heap.push(std::move(p));
  }
  std::size_t panels = initial;
  auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * total.cwiseAbs().maxCoeff()); };
  while (err > target()) {
    if (panels >= opt.max_panels)
      throw NumericalError("quadrature did not converge within max_panels; error estimate " +
                           std::to_string(err));
    detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // cannot bisect further; accept the remaining error
      heap.push(std::move(worst));
      break;
    }
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(std::move(left));
    heap.push(std::move(right));
    ++panels;
  }
  // re-sum to shed accumulated cancellation from the running updates
  Vec sum = Vec::Zero(total.size());
  double esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  out.value = std::move(sum);
  out.error = esum;
  out.panels = panels;
  return out;
}

/// Integral over [c + w, inf) through the substitution e = c + w/u, u in (0, 1].
template <class F>
Result integrate_upper_tail(F&& f, double c, double w, const Options& opt) {
  auto g = [&](double u) -> Vec { return f(c + w / u) * (w / (u * u)); };
  Options o = opt;
  o.max_width = 0.0;
  return integrate(g, 0.0, 1.0, o);
}

/// Integral over (-inf, c - w] through e = c - w/u.
template <class F>
Result integrate_lower_tail(F&& f, double c, double w, const Options& opt) {
  auto g = [&](double u) -> Vec { return f(c - w / u) * (w / (u * u)); };
  Options o = opt;
  o.max_width = 0.0;
  return integrate(g, 0.0, 1.0, o);
}

/// Integral over the whole real line: adaptive core [c - w, c + w] plus mapped tails.
template <class F>
Result integrate_real_line(F&& f, double c, double w, const Options& core, const Options& tails) {
  Result mid = integrate(f, c - w, c + w, core);
  Result lo = integrate_lower_tail(f, c, w, tails);
  Result hi = integrate_upper_tail(f, c, w, tails);
  Result out;
  out.value = mid.value + lo.value + hi.value;
  out.error = mid.error + lo.error + hi.error;
  out.panels = mid.panels + lo.panels + hi.panels;
  return out;
}

/// Fixed n-point Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace epd::quad
