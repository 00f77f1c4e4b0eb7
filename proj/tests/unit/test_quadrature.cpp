#include <gtest/gtest.h>

#include <cmath>

#include "contagion/quadrature.hpp"

using contagion::integrate_adaptive;

TEST(Quadrature, Polynomial) {
  const auto r = integrate_adaptive([](double x) { return x * x; }, 0.0, 1.0);
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-15);
}

TEST(Quadrature, Kink) {
  const auto r = integrate_adaptive([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0);
  EXPECT_NEAR(r.value, 0.5 * (0.09 + 0.49), 1e-11);
}

TEST(Quadrature, PowerLawTail) {
  // int_1^1e4 x^-2.5 dx
  const auto r = integrate_adaptive([](double x) { return std::pow(x, -2.5); }, 1.0, 1e4);
  EXPECT_NEAR(r.value, (1.0 - std::pow(1e4, -1.5)) / 1.5, 1e-9);
}

TEST(Quadrature, ErrorEstimateCoversTruth) {
  contagion::QuadratureOptions opt;
  opt.max_intervals = 3;
  const auto r = integrate_adaptive([](double x) { return std::sqrt(x); }, 0.0, 1.0, opt);
  EXPECT_LE(std::abs(r.value - 2.0 / 3.0), 10 * r.error + 1e-15);
}

TEST(Quadrature, EmptyInterval) {
  EXPECT_EQ(integrate_adaptive([](double) { return 1.0; }, 2.0, 2.0).value, 0.0);
}
