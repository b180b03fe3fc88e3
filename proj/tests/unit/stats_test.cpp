#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "robopt/stats.hpp"

using namespace robopt;

TEST(Percentile, ConstantSample) {
  const std::vector<double> v(17, 3.25);
  for (double q : {0.0, 16.0, 50.0, 84.0, 100.0}) EXPECT_EQ(percentile(v, q), 3.25);
}

TEST(Percentile, LinearInterpolation) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_EQ(percentile(v, 50.0), 3.0);
  EXPECT_EQ(percentile(v, 0.0), 1.0);
  EXPECT_EQ(percentile(v, 100.0), 5.0);
  EXPECT_DOUBLE_EQ(percentile(v, 10.0), 1.4);  // position 0.4 between 1 and 2
  const std::vector<double> w{0.0, 10.0};
  EXPECT_DOUBLE_EQ(percentile(w, 84.0), 8.4);
}

TEST(Percentile, EmptyAndRange) {
  const std::vector<double> empty;
  EXPECT_THROW(percentile(empty, 50.0), EmptySampleError);
  EXPECT_THROW(perc_deviations(empty), EmptySampleError);
  EXPECT_THROW(mc_error(empty), EmptySampleError);
  EXPECT_THROW(percentile(std::vector<double>{1.0}, 101.0), NumericError);
}

TEST(Percentile, StandardNormalReference) {
  // Phi^-1(0.84) = 0.994457883...
  Rng rng(7);
  std::normal_distribution<double> n;
  std::vector<double> v(1000000);
  for (auto& x : v) x = n(rng);
  const auto [sm, sp] = perc_deviations(v);
  EXPECT_NEAR(sp, 0.99446, 0.02 * 0.99446);
  EXPECT_NEAR(sm, 0.99446, 0.02 * 0.99446);
  EXPECT_LT(std::abs(percentile(v, 50.0)), 0.005);
}

TEST(PercDeviations, ExponentialIsRightSkewed) {
  // Quantiles of Exp(1): -ln(1-q) -> 0.1744, 0.6931, 1.8326.
  Rng rng(3);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(1000000);
  for (auto& x : v) x = e(rng);
  const SortedSample s(v);
  EXPECT_NEAR(s.percentile(16.0), -std::log(0.84), 0.005);
  EXPECT_NEAR(s.percentile(50.0), std::log(2.0), 0.005);
  EXPECT_NEAR(s.percentile(84.0), -std::log(0.16), 0.01);
  const auto [sm, sp] = perc_deviations(v);
  EXPECT_GT(sp, sm);
}

TEST(PercDeviations, ConstantAndSymmetric) {
  const auto [a, b] = perc_deviations(std::vector<double>(9, 2.0));
  EXPECT_EQ(a, 0.0);
  EXPECT_EQ(b, 0.0);
  std::vector<double> sym;
  for (int i = -50; i <= 50; ++i) sym.push_back(i);
  const auto [c, d] = perc_deviations(sym);
  EXPECT_DOUBLE_EQ(c, d);
}

TEST(McError, HandValues) {
  EXPECT_DOUBLE_EQ(mc_error(std::vector<double>{0.0, 2.0}), std::sqrt(0.5));
  EXPECT_EQ(mc_error(std::vector<double>(10, 4.0)), 0.0);
  EXPECT_DOUBLE_EQ(population_variance(std::vector<double>{0.0, 2.0}), 1.0);
}

TEST(McError, QuarterSampleHalvesError) {
  Rng rng(11);
  std::normal_distribution<double> n(3.0, 2.0);
  double ratio_sum = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(2000), b(8000);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    ratio_sum += mc_error(b) / mc_error(a);
  }
  EXPECT_NEAR(ratio_sum / 20.0, 0.5, 0.05);
}
