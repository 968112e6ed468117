#include <gtest/gtest.h>

#include <cmath>

#include "epdyn/heisenberg.hpp"
#include "support.hpp"

using namespace epd;

TEST(Fermi, SymmetryPointIsHalf) {
  for (double T : {0.01, 1.0, 30.0}) EXPECT_DOUBLE_EQ(fermi(0.7, ReservoirSpec::thermal(T, 0.7)), 0.5);
  ReservoirSpec z;
  z.zero_temperature = true;
  z.mu = 0.3;
  EXPECT_EQ(fermi(0.3, z), 0.5);
  EXPECT_EQ(fermi(0.2, z), 1.0);
  EXPECT_EQ(fermi(0.4, z), 0.0);
}

TEST(Fermi, ThermalValue) {
  // 1/(e+1) to 25 digits: 0.2689414213699951207488408
  EXPECT_NEAR(fermi(1.0, ReservoirSpec::thermal(1.0, 0.0)), 0.2689414213699951207, 1e-16);
}

TEST(Fermi, OverrideIgnoresEnergy) {
  for (double e : {-100.0, 0.0, 3.0, 1e6}) EXPECT_EQ(fermi(e, ReservoirSpec::constant(0.3)), 0.3);
}

TEST(Fermi, NoOverflowFarFromMu) {
  const auto s = ReservoirSpec::thermal(1e-3, 0.0);
  EXPECT_EQ(fermi(-50.0, s), 1.0);
  EXPECT_GE(fermi(50.0, s), 0.0);
  EXPECT_TRUE(std::isfinite(fermi(50.0, s)));
}

TEST(Validate, AcceptsStrongCouplingDoubleDot) {
  EXPECT_NO_THROW(validate(fixtures::strong(0.1), fixtures::thermal()));
}

TEST(Validate, NegativeRate) {
  try {
    validate(fixtures::dqd(-0.1, 0.1, 0.1), fixtures::thermal());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.issues().size(), 1u);
    EXPECT_EQ(e.issues()[0], "negative rate at dot 1");
  }
}

TEST(Validate, LengthMismatchCollected) {
  ChainParams p = ChainParams::resonant({0.5, 0.1, 0.5}, 0.1, 1.0);
  p.gamma = {0.5, 0.1};
  try {
    validate(p, fixtures::uniform(0.5, 3));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("length mismatch"), std::string::npos);
  }
}

TEST(Validate, CollectsEveryIssue) {
  ChainParams p = fixtures::dqd(-1.0, -2.0, NAN);
  std::vector<ReservoirSpec> s{ReservoirSpec::thermal(0.0, 0.0), ReservoirSpec::constant(1.5)};
  const auto issues = validation_issues(p, s);
  EXPECT_EQ(issues.size(), 5u);
}

TEST(Validate, InitialAndGrid) {
  EXPECT_THROW(validate_initial({{0.5}}, 2), ConfigError);
  EXPECT_THROW(validate_initial({{0.5, 1.2}}, 2), ConfigError);
  EXPECT_NO_THROW(validate_initial({{0.0, 1.0}}, 2));
  EXPECT_THROW(validate_grid({1.0, 1.0, 5}), ConfigError);
  EXPECT_THROW(validate_grid({0.0, 1.0, 0}), ConfigError);
  EXPECT_NO_THROW(validate_grid({2.0, 2.0, 1}));
}

TEST(TimeGrid, EndpointsExact) {
  const TimeGrid g{0.5, 10.5, 11};
  const auto t = g.times();
  ASSERT_EQ(t.size(), 11u);
  EXPECT_EQ(t.front(), 0.5);
  EXPECT_EQ(t.back(), 10.5);
  EXPECT_DOUBLE_EQ(t[3], 3.5);
  EXPECT_EQ(TimeGrid({4.0, 4.0, 1}).times(), std::vector<double>{4.0});
}

TEST(BuildA, StrongCouplingEntries) {
  const auto a = he::build_A(fixtures::strong(0.1));
  EXPECT_EQ(a(0, 0), cplx(-0.25, -1.0));
  EXPECT_EQ(a(0, 1), cplx(0.0, -0.1));
  EXPECT_EQ(a(1, 0), cplx(0.0, -0.1));
  EXPECT_EQ(a(1, 1), cplx(-0.05, -1.0));
}

TEST(BuildA, Detuned) {
  ChainParams p = fixtures::strong(0.1);
  p.eps = {1.0, 1.2};
  const auto a = he::build_A(p);
  EXPECT_EQ(a(1, 1), cplx(-0.05, -1.2));
  EXPECT_EQ(a(0, 0), cplx(-0.25, -1.0));
}

TEST(BuildA, DecoupledIsDiagonal) {
  const auto a = he::build_A(fixtures::strong(0.0));
  EXPECT_EQ(a(0, 1), cplx(0.0));
  EXPECT_EQ(a(1, 0), cplx(0.0));
}

TEST(Eta, ExceptionalPoints) {
  EXPECT_EQ(he::eta_he(fixtures::strong(0.1)).eta_squared, 0.0);
  EXPECT_NEAR(he::eta_he(fixtures::weak(2.25e-3)).eta_squared, 0.0, 1e-20);
  EXPECT_DOUBLE_EQ(he::g_ep(0.5, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(he::g_ep(1e-2, 1e-3), 2.25e-3);
}

TEST(Eta, Underdamped) {
  const auto e = he::eta_he(fixtures::strong(3.0));
  EXPECT_NEAR(e.eta_squared, -8.99, 1e-13);
  EXPECT_EQ(e.eta.real(), 0.0);
  EXPECT_NEAR(e.eta.imag(), 2.99833287011299, 1e-12);
  // eigenvalue gap is 2 eta
  const auto ev = he::build_A(fixtures::strong(3.0)).eigenvalues();
  EXPECT_NEAR(std::abs(ev(0) - ev(1)), 2.0 * e.eta.imag(), 1e-12);
}

TEST(Eta, DetunedRejected) {
  ChainParams p = fixtures::strong(0.1);
  p.eps = {1.0, 1.2};
  try {
    he::eta_he(p);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("resonance required"), std::string::npos);
  }
}

TEST(Classify, StrongCouplingTriple) {
  EXPECT_EQ(he::classify(fixtures::strong(3.0)).regime, he::Regime::Underdamped);
  EXPECT_EQ(he::classify(fixtures::strong(0.05)).regime, he::Regime::Overdamped);
  EXPECT_EQ(he::classify(fixtures::strong(0.1)).regime, he::Regime::ExceptionalPoint);
  EXPECT_EQ(he::classify(fixtures::weak(2.25e-3)).regime, he::Regime::ExceptionalPoint);
}

TEST(Classify, ThresholdScalesWithRates) {
  const auto c = he::classify(fixtures::strong(0.1));
  EXPECT_DOUBLE_EQ(c.theta, 1e-12 * 0.25);
  // a coupling perturbed far beyond theta is no longer an EP
  EXPECT_NE(he::classify(fixtures::strong(0.1 + 1e-6)).regime, he::Regime::ExceptionalPoint);
}

TEST(Classify, EqualRatesNeverExceptionalForPositiveCoupling) {
  for (double g : {1e-3, 0.1, 1.0}) EXPECT_EQ(he::classify(fixtures::dqd(0.3, 0.3, g)).regime, he::Regime::Underdamped);
}
