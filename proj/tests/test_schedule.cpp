#include <gtest/gtest.h>

#include <cmath>

#include "facdiff/rng.hpp"
#include "facdiff/schedule.hpp"

namespace facdiff {
namespace {

double b_at(const DiffusionSchedule& s, int t) { return s.steps() * (1.0 - s.step_retention(t)); }

TEST(Schedule, EndpointsOfTheLinearRate) {
  const auto s = build_schedule(50);
  EXPECT_NEAR(b_at(s, 1), 0.1, 1e-12);
  EXPECT_NEAR(b_at(s, 50), 20.0, 1e-12);
}

TEST(Schedule, BoundaryConditionsAtDataTime) {
  for (double sigma0 : {0.0, 0.05, 0.3}) {
    const auto s = build_schedule(30, 0.1, 20.0, sigma0);
    EXPECT_EQ(s.alpha(0), 1.0);
    EXPECT_EQ(s.beta(0), 0.0);
    EXPECT_EQ(s.omega(0), sigma0);
  }
}

TEST(Schedule, FrozenValuesAtDefaults) {
  const auto s = build_schedule(50);
  EXPECT_LE(s.abar(50), 1e-4);
  EXPECT_NEAR(s.abar(50), 7.744765699226736e-06, 1e-15);
  EXPECT_NEAR(s.alpha(50), 0.002782941914454331, 1e-14);
  EXPECT_NEAR(s.abar(5), 0.9117319664618644, 1e-13);
  EXPECT_NEAR(s.beta(1), 0.044721359549995815, 1e-14);
}

TEST(Schedule, OmegaCombinesPriorWidthAndNoise) {
  const auto s = build_schedule(40, 0.1, 20.0, 0.2);
  for (int t = 0; t <= 40; ++t) {
    EXPECT_NEAR(s.omega2(t), s.alpha(t) * s.alpha(t) * 0.04 + s.beta(t) * s.beta(t), 1e-14);
    EXPECT_NEAR(s.alpha(t) * s.alpha(t) + s.beta(t) * s.beta(t), 1.0, 1e-14);
  }
}

TEST(Schedule, AlphaDecreasesAndBetaIncreases) {
  for (int steps : {21, 25, 50, 100, 400}) {
    const auto s = build_schedule(steps);
    for (int t = 1; t < steps; ++t) {
      EXPECT_LT(s.alpha(t + 1), s.alpha(t)) << "T=" << steps << " t=" << t;
      EXPECT_GT(s.beta(t + 1), s.beta(t)) << "T=" << steps << " t=" << t;
    }
  }
}

TEST(Schedule, RejectsInvalidParameters) {
  EXPECT_THROW(build_schedule(1), std::invalid_argument);
  EXPECT_THROW(build_schedule(50, 0.0, 20.0), std::invalid_argument);
  EXPECT_THROW(build_schedule(50, 5.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_schedule(50, 0.1, 20.0, -0.1), std::invalid_argument);
  // b_T / T >= 1 would make the last retention non-positive.
  EXPECT_THROW(build_schedule(20), std::invalid_argument);
  EXPECT_NO_THROW(build_schedule(21));
}

TEST(Schedule, TwoStepCompositionMatchesOneStepMarginal) {
  const auto s = build_schedule(50);
  const int mid = 12;
  const int end = 30;
  const double x0 = 1.7;
  const double ratio = s.alpha(end) / s.alpha(mid);
  const double hop_sd = std::sqrt(1.0 - ratio * ratio);

  Rng rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int samples = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double xs = s.alpha(mid) * x0 + s.beta(mid) * normal(rng);
    const double xt = ratio * xs + hop_sd * normal(rng);
    sum += xt;
    sq += xt * xt;
  }
  const double mean = sum / samples;
  const double var = sq / samples - mean * mean;
  const double want_var = s.beta(end) * s.beta(end);
  EXPECT_NEAR(mean, s.alpha(end) * x0, 3.0 * std::sqrt(want_var / samples));
  EXPECT_NEAR(var, want_var, 3.0 * want_var * std::sqrt(2.0 / samples));
}

TEST(GuidanceScale, ConstantIsInverseEta) {
  const auto s = build_schedule(50);
  GuidanceSchedule g{GuidanceKind::constant, 0.1};
  for (int t : {1, 17, 50}) EXPECT_NEAR(guidance_scale(g, s, t).value, 10.0, 1e-12);
}

TEST(GuidanceScale, SigmaFollowsBeta) {
  const auto s = build_schedule(50);
  GuidanceSchedule g{GuidanceKind::sigma, 0.106};
  EXPECT_NEAR(guidance_scale(g, s, 50).value, 9.433925732166536, 1e-9);
  EXPECT_NEAR(guidance_scale(g, s, 7).value, s.beta(7) / 0.106, 1e-12);
}

TEST(GuidanceScale, SnrAndLinear) {
  const auto s = build_schedule(50);
  GuidanceSchedule snr{GuidanceKind::snr, 2.0};
  EXPECT_NEAR(guidance_scale(snr, s, 10).value, s.beta(10) / s.alpha(10) / 2.0, 1e-12);
  EXPECT_FALSE(guidance_scale(snr, s, 50).clamped);

  GuidanceSchedule lin{GuidanceKind::linear, 0.5, 0.2, 1.0};
  EXPECT_NEAR(guidance_scale(lin, s, 50).value, 0.4, 1e-12);
  EXPECT_NEAR(guidance_scale(lin, s, 1).value, 2.0, 1e-12);
}

TEST(GuidanceScale, SnrClampsTinyAlpha) {
  // An aggressive noise ramp drives alpha below the floor.
  const auto s = build_schedule(50, 20.0, 49.0);
  ASSERT_LT(s.alpha(50), 1e-12);
  GuidanceSchedule snr{GuidanceKind::snr, 1.0};
  const auto g = guidance_scale(snr, s, 50);
  EXPECT_TRUE(g.clamped);
  EXPECT_NEAR(g.value, s.beta(50) / 1e-12, 1e-3);
  EXPECT_FALSE(guidance_scale(snr, s, 10).clamped);
}

TEST(GuidanceScale, RejectsOutOfRange) {
  const auto s = build_schedule(50);
  GuidanceSchedule g;
  EXPECT_THROW(guidance_scale(g, s, 0), std::out_of_range);
  EXPECT_THROW(guidance_scale(g, s, 51), std::out_of_range);
  g.eta = 0.0;
  EXPECT_THROW(guidance_scale(g, s, 1), std::invalid_argument);
  EXPECT_THROW(guidance_kind_from_string("cosine"), std::invalid_argument);
}

}  // namespace
}  // namespace facdiff
