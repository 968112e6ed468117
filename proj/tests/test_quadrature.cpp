#include <gtest/gtest.h>

#include <cmath>

#include "epdyn/model.hpp"
#include "epdyn/quadrature.hpp"

using namespace epd;

namespace {
quad::Vec scalar(cplx z) {
  quad::Vec v(1);
  v(0) = z;
  return v;
}
}  // namespace

TEST(Quadrature, Polynomial) {
  const auto r = quad::integrate([](double x) { return scalar(x * x * x - 2.0 * x); }, 0.0, 2.0, {});
  EXPECT_NEAR(r.value(0).real(), 0.0, 1e-14);
  EXPECT_LE(r.panels, 2u);
}

TEST(Quadrature, LorentzianOverRealLine) {
  const double gam = 0.05;
  auto f = [gam](double x) { return scalar(gam / (M_PI * ((x - 1.0) * (x - 1.0) + gam * gam))); };
  quad::Options core;
  core.abs_tol = 1e-13;
  const auto r = quad::integrate_real_line(f, 1.0, 10.0, core, core);
  EXPECT_NEAR(r.value(0).real(), 1.0, 1e-11);
}

TEST(Quadrature, ComplexOscillatory) {
  // Int_0^{2pi} e^{i 5 x} dx = 0, Int_0^{pi} e^{i x} dx = 2i
  const auto a = quad::integrate([](double x) { return scalar(std::exp(cplx(0.0, 5.0 * x))); }, 0.0, 2.0 * M_PI, {});
  EXPECT_LT(std::abs(a.value(0)), 1e-12);
  const auto b = quad::integrate([](double x) { return scalar(std::exp(cplx(0.0, x))); }, 0.0, M_PI, {});
  EXPECT_LT(std::abs(b.value(0) - cplx(0.0, 2.0)), 1e-12);
}

TEST(Quadrature, VectorValuedSharesPanels) {
  auto f = [](double x) {
    quad::Vec v(2);
    v << std::exp(-x), cplx(0.0, std::cos(x));
    return v;
  };
  const auto r = quad::integrate(f, 0.0, 3.0, {});
  EXPECT_NEAR(r.value(0).real(), 1.0 - std::exp(-3.0), 1e-13);
  EXPECT_NEAR(r.value(1).imag(), std::sin(3.0), 1e-13);
}

TEST(Quadrature, FermiTail) {
  auto f = [](double x) { return scalar(1.0 / (std::exp(x) + 1.0)); };
  const auto r = quad::integrate_upper_tail(f, 0.0, 1.0, {});
  // Int_1^inf f = ln(1 + 1/e)
  EXPECT_NEAR(r.value(0).real(), std::log1p(std::exp(-1.0)), 1e-10);
}

TEST(Quadrature, GaussLegendreExactForDegree2nMinus1) {
  std::vector<double> x, w;
  quad::gauss_legendre(20, x, w);
  double s = 0.0, m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += w[i];
    m += w[i] * std::pow(x[i], 38);
  }
  EXPECT_NEAR(s, 2.0, 1e-14);
  EXPECT_NEAR(m, 2.0 / 39.0, 1e-14);
}

TEST(Quadrature, PanelBudgetReported) {
  quad::Options o;
  o.max_panels = 4;
  o.abs_tol = 1e-15;
  o.rel_tol = 0.0;
  EXPECT_THROW(quad::integrate([](double x) { return scalar(std::sqrt(std::abs(x))); }, -1.0, 1.0, o),
               NumericalError);
}
