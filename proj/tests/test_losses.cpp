#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "eos/error.hpp"
#include "eos/losses.hpp"
#include "support/oracles.hpp"

using namespace eos;

namespace {

std::vector<LossSpec> zoo() {
  return {LossSpec::rescaled_sym_logistic(), LossSpec::sqrt_loss(),        LossSpec::huber(),
          LossSpec::higher_order(1.5),       LossSpec::higher_order(2.0),  LossSpec::higher_order(4.0 / 3.0),
          LossSpec::higher_order(10.0),      LossSpec::sym_logistic()};
}

std::vector<double> grid_up_to(double hi, int n) {
  std::vector<double> g;
  for (int i = 1; i <= n; ++i) g.push_back(hi * i / n);
  return g;
}

bool near_kink(const LossSpec& spec, double s) {
  if (spec.kind == LossKind::Huber) return std::fabs(std::fabs(s) - 1.0) < 1e-3;
  if (spec.kind == LossKind::HigherOrder) {
    return std::fabs(std::fabs(s) - higher_order_r(spec.beta)) < 1e-3;
  }
  return false;
}

}  // namespace

TEST(LossValue, ClosedFormAnchors) {
  EXPECT_EQ(loss_value(LossSpec::sqrt_loss(), 0.0), 1.0);
  EXPECT_EQ(loss_value(LossSpec::huber(), 2.0), 1.5);
  EXPECT_EQ(loss_value(LossSpec::huber(), 0.5), 0.125);
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::rescaled_sym_logistic(), 0.0), std::log(2.0));
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::sym_logistic(), 0.0), std::log(2.0));
  EXPECT_EQ(loss_value(LossSpec::higher_order(2.0), 0.0), 0.0);
}

TEST(LossValue, EvenAndLargeArgumentStable) {
  for (const auto& spec : zoo()) {
    for (double s : {0.01, 0.3, 1.7, 4.0, 30.0}) {
      EXPECT_EQ(loss_value(spec, s), loss_value(spec, -s)) << spec.name() << " " << s;
    }
    EXPECT_TRUE(std::isfinite(loss_value(spec, 800.0))) << spec.name();
  }
}

TEST(LossValue, HigherOrderContinuousAtBranchPoint) {
  for (double beta : {4.0 / 3.0, 1.5, 2.0, 3.0, 10.0}) {
    const auto spec = LossSpec::higher_order(beta);
    const double r = higher_order_r(beta);
    EXPECT_NEAR(loss_value(spec, std::nextafter(r, 0.0)), loss_value(spec, r), 1e-12) << beta;
    EXPECT_NEAR(loss_deriv(spec, std::nextafter(r, 0.0)), loss_deriv(spec, r), 1e-12) << beta;
    // 1 - c_beta r_beta^beta = 1/r_beta.
    EXPECT_NEAR(1.0 - higher_order_c(beta) * std::pow(r, beta), 1.0 / r, 1e-15) << beta;
  }
}

TEST(LossDeriv, ClosedFormAnchors) {
  EXPECT_EQ(loss_deriv(LossSpec::huber(), 0.5), 0.5);
  EXPECT_EQ(loss_deriv(LossSpec::huber(), 1.0), 1.0);
  EXPECT_EQ(loss_deriv(LossSpec::huber(), -1.0), -1.0);
  EXPECT_DOUBLE_EQ(loss_deriv(LossSpec::sqrt_loss(), 1.0), 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(loss_deriv(LossSpec::rescaled_sym_logistic(), 0.7), std::tanh(0.7));
  const double e = std::exp(1.3);
  EXPECT_DOUBLE_EQ(loss_deriv(LossSpec::sym_logistic(), 1.3), 0.5 * (e - 1.0) / (e + 1.0));
  for (const auto& spec : zoo()) EXPECT_EQ(loss_deriv(spec, 0.0), 0.0) << spec.name();
}

TEST(LossDeriv, HigherOrderConstants) {
  EXPECT_DOUBLE_EQ(higher_order_c(2.0), 4.0 / 27.0);
  EXPECT_DOUBLE_EQ(higher_order_r(2.0), 1.5);
  EXPECT_DOUBLE_EQ(higher_order_c(1.0), 0.25);
  const auto spec = LossSpec::higher_order(2.0);
  EXPECT_DOUBLE_EQ(ratio_r(spec, 0.1), 1.0 - 4.0 / 27.0 * 0.01);
  EXPECT_EQ(loss_deriv(spec, 2.0), 1.0);
  EXPECT_EQ(loss_deriv(spec, -1.5), -1.0);
}

TEST(LossDeriv, MatchesFiniteDifferenceOfValue) {
  constexpr double h = 1e-6;
  for (const auto& spec : zoo()) {
    for (double s = -5.0; s <= 5.0; s += 0.0371) {
      if (near_kink(spec, s)) continue;
      const double fd = oracle::central_difference([&](double u) { return loss_value(spec, u); }, s, h);
      EXPECT_LE(oracle::rel_diff(loss_deriv(spec, s), fd, 1e-6), 1e-6) << spec.name() << " " << s;
    }
  }
}

TEST(LossDeriv, SecondDerivMatchesFiniteDifference) {
  constexpr double h = 1e-5;
  for (const auto& spec : zoo()) {
    for (double s = -4.0; s <= 4.0; s += 0.0913) {
      if (near_kink(spec, s)) continue;
      const double fd = oracle::central_difference([&](double u) { return loss_deriv(spec, u); }, s, h);
      EXPECT_NEAR(loss_second_deriv(spec, s), fd, 1e-6) << spec.name() << " " << s;
    }
    EXPECT_EQ(loss_second_deriv(spec, 0.0), spec.second_deriv_at_zero) << spec.name();
  }
}

TEST(LossDeriv, OddLipschitzAndMonotone) {
  for (const auto& spec : zoo()) {
    double prev = -2.0;
    for (double s = -20.0; s <= 20.0; s += 0.0517) {
      const double d = loss_deriv(spec, s);
      EXPECT_EQ(loss_deriv(spec, -s), -d) << spec.name() << " " << s;
      EXPECT_LE(std::fabs(d), 1.0) << spec.name() << " " << s;
      EXPECT_GE(d, prev) << spec.name() << " " << s;
      prev = d;
    }
  }
}

TEST(LossSecondDeriv, HuberKinkThrows) {
  try {
    loss_second_deriv(LossSpec::huber(), -1.0);
    FAIL() << "expected NotDifferentiable";
  } catch (const EosError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDifferentiable);
  }
  EXPECT_EQ(loss_second_deriv(LossSpec::huber(), 0.99), 1.0);
  EXPECT_EQ(loss_second_deriv(LossSpec::huber(), 1.01), 0.0);
}

TEST(RatioR, EvenBoundedAndUnitAtOrigin) {
  for (const auto& spec : zoo()) {
    const double c0 = spec.second_deriv_at_zero;
    EXPECT_EQ(ratio_r(spec, 0.0), c0);
    for (double s = 1e-4; s <= 12.0; s *= 1.13) {
      EXPECT_EQ(ratio_r(spec, s), ratio_r(spec, -s)) << spec.name();
      EXPECT_LE(ratio_r(spec, s), c0) << spec.name() << " " << s;
    }
    EXPECT_NEAR(ratio_r(spec, 1e-4), c0, 1e-6 * c0) << spec.name();
  }
  EXPECT_EQ(ratio_r(LossSpec::huber(), 0.5), 1.0);
  EXPECT_EQ(LossSpec::sym_logistic().second_deriv_at_zero, 0.25);
}

TEST(Certify, DeclaredConstantsHold) {
  const auto sqrt_report = certify_assumptions(LossSpec::sqrt_loss(), grid_up_to(0.4, 400));
  EXPECT_GE(sqrt_report.upper_margin, -1e-14);
  EXPECT_GE(sqrt_report.lipschitz_margin, 0.0);

  const auto rsym = certify_assumptions(LossSpec::rescaled_sym_logistic(), grid_up_to(0.25, 400));
  EXPECT_GE(rsym.upper_margin, -1e-14);
  ASSERT_TRUE(rsym.lower_margin.has_value());
  EXPECT_GE(*rsym.lower_margin, -1e-14);

  const auto huber = certify_assumptions(LossSpec::huber(), grid_up_to(10.0, 1000));
  EXPECT_FALSE(huber.lower_margin.has_value());
  EXPECT_GE(huber.upper_margin, 0.0);

  for (const auto& spec : zoo()) {
    EXPECT_NO_THROW(certify_assumptions(spec, grid_up_to(10.0, 2000))) << spec.name();
  }
}

TEST(Certify, ViolationNamesPointAndClause) {
  auto bogus = LossSpec::sqrt_loss();
  bogus.c_lower = 0.9;
  try {
    certify_assumptions(bogus, grid_up_to(0.9, 90));
    FAIL() << "expected CertificationFailed";
  } catch (const EosError& e) {
    EXPECT_EQ(e.code(), ErrorCode::CertificationFailed);
    EXPECT_NE(std::string(e.what()).find("s="), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
  const std::vector<double> bad{0.0, 0.1};
  EXPECT_THROW(certify_assumptions(LossSpec::sqrt_loss(), bad), EosError);
}

TEST(LossSpecParse, NamesRoundTrip) {
  for (const char* name : {"rsym-logistic", "sqrt", "huber", "sym-logistic", "higher-order:2",
                           "higher-order:1.5", "higher-order:10"}) {
    EXPECT_EQ(LossSpec::parse(name).name(), name);
  }
  EXPECT_DOUBLE_EQ(LossSpec::parse("higher-order:4/3").beta, 4.0 / 3.0);
  EXPECT_EQ(LossSpec::parse("higher-order:3/2").beta, 1.5);
  for (const char* bad : {"logistic", "higher-order:", "higher-order:1", "higher-order:x",
                          "higher-order:3/0", "higher-order:inf"}) {
    EXPECT_THROW(LossSpec::parse(bad), EosError) << bad;
  }
}
