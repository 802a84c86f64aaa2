#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "facdiff/score.hpp"
#include "test_util.hpp"

namespace facdiff {
namespace {

using testing::fd_gradient;
using testing::fd_jacobian;
using testing::random_bipolar;
using testing::rel_err;

Codebook small_book(std::uint64_t seed, int dim, int size, double scale = 1.0) {
  return generate_codebooks(seed, dim, size, 1, scale).front();
}

// log (1/n) sum_c N(x; alpha c, omega^2 I), summed directly.
double direct_log_density(const Mat& centers, const Vec& x, double alpha, double omega2) {
  double total = 0.0;
  const double d = static_cast<double>(x.size());
  for (Eigen::Index c = 0; c < centers.cols(); ++c) {
    const double sq = (x - alpha * centers.col(c)).squaredNorm();
    total += std::exp(-sq / (2.0 * omega2)) / std::pow(2.0 * std::numbers::pi * omega2, d / 2.0);
  }
  return std::log(total / static_cast<double>(centers.cols()));
}

TEST(LogDensity, PeakOfASingleGaussian) {
  const auto book = small_book(1, 6, 1);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50, 0.1, 20.0, 0.1);
  const int t = 10;
  const Vec x = s.alpha(t) * book.scaled().col(0);
  EXPECT_NEAR(log_density(prior, x, t, s),
              -0.5 * 6 * std::log(2.0 * std::numbers::pi * s.omega2(t)), 1e-10);
}

TEST(LogDensity, MatchesDirectSummation) {
  const auto book = small_book(2, 5, 3);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50, 0.1, 20.0, 0.2);
  Rng rng(3);
  for (int t : {1, 5, 20, 50}) {
    const Vec x = standard_normal(5, rng);
    EXPECT_NEAR(log_density(prior, x, t, s),
                direct_log_density(book.scaled(), x, s.alpha(t), s.omega2(t)), 1e-10);
  }
}

TEST(LogDensity, DiracMixtureIsAnError) {
  const auto book = small_book(2, 5, 3);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50);
  EXPECT_THROW(log_density(prior, Vec::Zero(5), 0, s), std::domain_error);
  EXPECT_THROW(log_density(prior, Vec::Zero(4), 3, s), std::invalid_argument);
  EXPECT_THROW(log_density(prior, Vec::Zero(5), 51, s), std::out_of_range);
}

TEST(Responsibilities, OppositeCentersSplitEvenly) {
  Mat raw(4, 2);
  raw.col(0) << 1, -1, 1, 1;
  raw.col(1) = -raw.col(0);
  const auto prior = AnalyticPrior::vector_space(Codebook(raw, 1.0));
  const auto s = build_schedule(50, 0.1, 20.0, 0.1);
  const Vec g = responsibilities(prior, Vec::Zero(4), 8, s);
  EXPECT_NEAR(g[0], 0.5, 1e-15);
  EXPECT_NEAR(g[1], 0.5, 1e-15);
}

TEST(Responsibilities, SingleComponentIsCertain) {
  const auto prior = AnalyticPrior::vector_space(small_book(4, 8, 1));
  const auto s = build_schedule(50, 0.1, 20.0, 0.1);
  Rng rng(1);
  EXPECT_DOUBLE_EQ(responsibilities(prior, standard_normal(8, rng), 3, s)[0], 1.0);
}

TEST(Responsibilities, MatchNormalizedDensityRatios) {
  const auto book = small_book(5, 6, 4);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50, 0.1, 20.0, 0.3);
  Rng rng(8);
  const int t = 12;
  const Vec x = standard_normal(6, rng);
  Vec dens(4);
  for (int c = 0; c < 4; ++c) {
    dens[c] = std::exp(-(x - s.alpha(t) * book.scaled().col(c)).squaredNorm() / (2 * s.omega2(t)));
  }
  dens /= dens.sum();
  EXPECT_LT((responsibilities(prior, x, t, s) - dens).norm(), 1e-12);
}

TEST(Responsibilities, SaturateAtDataTimeForNarrowComponents) {
  const auto book = small_book(6, 16, 5);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50, 0.1, 20.0, 1e-3);
  Rng rng(2);
  const Vec x = book.scaled().col(3) + 0.3 * standard_normal(16, rng);
  const Vec g = responsibilities(prior, x, 0, s);
  EXPECT_DOUBLE_EQ(g[3], 1.0);
}

TEST(Score, SingleGaussianClosedForm) {
  const auto book = small_book(7, 6, 1);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50, 0.1, 20.0, 0.1);
  Rng rng(4);
  const Vec x = standard_normal(6, rng);
  const int t = 9;
  const Vec want = (s.alpha(t) * book.scaled().col(0) - x) / s.omega2(t);
  EXPECT_LT((score(prior, x, t, s) - want).norm(), 1e-12);
  EXPECT_LT(score(prior, Vec(s.alpha(t) * book.scaled().col(0)), t, s).norm(), 1e-12);
}

// Score and log density stay consistent at any temperature and in both spaces.
TEST(Score, IsTheGradientOfTheLogDensity) {
  Rng rng(10);
  for (int probe = 0; probe < 40; ++probe) {
    const int d = 3 + probe % 4;
    const int n = 2 + probe % 3;
    const auto book = small_book(100 + probe, d, n);
    const double temp = probe % 2 ? 1.0 : 0.4;
    const auto prior = probe % 3 == 0 ? AnalyticPrior::latent_space(book, temp)
                                      : AnalyticPrior::vector_space(book, temp);
    const auto s = build_schedule(50, 0.1, 20.0, 0.15);
    const int t = 1 + probe % 50;
    const Vec x = standard_normal(prior.state_dim(), rng);
    const Vec fd = fd_gradient([&](const Vec& y) { return log_density(prior, y, t, s); }, x, 1e-5);
    EXPECT_LT(rel_err(score(prior, x, t, s), fd), 1e-5) << "probe " << probe;
  }
}

TEST(Tweedie, BothFormsAgree) {
  Rng rng(12);
  for (int probe = 0; probe < 30; ++probe) {
    const auto book = small_book(200 + probe, 7, 4, 0.5);
    const auto prior = AnalyticPrior::vector_space(book, 0.8);
    const auto s = build_schedule(50, 0.1, 20.0, 0.05 * (probe % 4));
    const int t = 1 + (probe * 7) % 50;
    const Vec x = standard_normal(7, rng);
    const auto ev = evaluate(prior, x, t, s);
    const Vec a = tweedie(ev, x);
    const Vec b = tweedie_from_score(ev, x);
    EXPECT_LT((s.alpha(t) * a - x - ev.beta2 * score(ev, x)).norm(), 1e-9 * x.norm());
    EXPECT_LT(rel_err(a, b), 1e-9);
  }
}

TEST(Tweedie, SingleSoftmaxUpdateWithoutPriorWidth) {
  const auto book = small_book(13, 8, 5, 0.7);
  const double temp = 1.3;
  const auto prior = AnalyticPrior::vector_space(book, temp);
  const auto s = build_schedule(50);
  Rng rng(5);
  for (int t : {1, 10, 30, 50}) {
    const Vec x = standard_normal(8, rng);
    Vec logits = (s.alpha(t) / (s.beta(t) * s.beta(t))) * temp * book.scaled().transpose() * x;
    logits.array() -= logits.maxCoeff();
    Vec w = logits.array().exp();
    w /= w.sum();
    const Vec want = book.scaled() * w;
    EXPECT_LT((tweedie(prior, x, t, s) - want).norm(), 1e-10 * std::max(1.0, want.norm()));
  }
}

TEST(Tweedie, AtDataTimeReturnsTheState) {
  const auto prior = AnalyticPrior::vector_space(small_book(14, 6, 3));
  const auto s = build_schedule(50, 0.1, 20.0, 0.2);
  Rng rng(6);
  const Vec x = standard_normal(6, rng);
  EXPECT_LT((tweedie(prior, x, 0, s) - x).norm(), 1e-12);
}

TEST(Tweedie, MatchesMonteCarloPosteriorMean) {
  const auto book = small_book(15, 4, 3);
  const auto prior = AnalyticPrior::vector_space(book);
  const double sigma0 = 0.4;
  const auto s = build_schedule(50, 0.1, 20.0, sigma0);
  const int t = 15;
  Rng rng(16);
  const Vec x = standard_normal(4, rng);

  // Sample x0 | x_t: pick a component by its posterior weight, then draw from
  // the Gaussian posterior of that component.
  const Vec gamma = responsibilities(prior, x, t, s);
  const double a = s.alpha(t);
  const double b2 = s.beta(t) * s.beta(t);
  const double precision = 1.0 / (sigma0 * sigma0) + a * a / b2;
  const double sd = 1.0 / std::sqrt(precision);
  std::discrete_distribution<int> pick(gamma.data(), gamma.data() + gamma.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  const int samples = 100000;
  Vec sum = Vec::Zero(4);
  Vec sq = Vec::Zero(4);
  for (int i = 0; i < samples; ++i) {
    const int c = pick(rng);
    const Vec mean = (book.scaled().col(c) / (sigma0 * sigma0) + a * x / b2) / precision;
    Vec draw(4);
    for (int k = 0; k < 4; ++k) draw[k] = mean[k] + sd * normal(rng);
    sum += draw;
    sq += draw.cwiseProduct(draw);
  }
  const Vec mc = sum / samples;
  const Vec var = sq / samples - mc.cwiseProduct(mc);
  const Vec want = tweedie(prior, x, t, s);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(mc[k], want[k], 3.0 * std::sqrt(var[k] / samples)) << "coordinate " << k;
  }
}

TEST(TweedieVjp, SingleComponentLeavesOnlyTheIdentityTerm) {
  const auto prior = AnalyticPrior::vector_space(small_book(17, 6, 1));
  const auto s = build_schedule(50, 0.1, 20.0, 0.3);
  Rng rng(7);
  const Vec x = standard_normal(6, rng);
  const Vec v = standard_normal(6, rng);
  const int t = 20;
  const double c = s.alpha(t) * 0.09 / s.omega2(t);
  EXPECT_LT((tweedie_vjp(prior, x, t, s, v) - c * v).norm(), 1e-12);
}

TEST(TweedieVjp, MatchesFiniteDifferenceJacobian) {
  Rng rng(18);
  for (int probe = 0; probe < 20; ++probe) {
    const auto book = small_book(300 + probe, 6, 4);
    const auto prior = probe % 2 ? AnalyticPrior::latent_space(book, 0.9)
                                 : AnalyticPrior::vector_space(book, 0.9);
    const auto s = build_schedule(50, 0.1, 20.0, 0.2);
    const int t = 5 + probe * 2;
    const Vec x = standard_normal(prior.state_dim(), rng);
    const Vec v = standard_normal(prior.state_dim(), rng);
    const Mat j = fd_jacobian([&](const Vec& y) { return tweedie(prior, y, t, s); }, x, 1e-5);
    EXPECT_LT(rel_err(tweedie_vjp(prior, x, t, s, v), j.transpose() * v), 1e-4)
        << "probe " << probe;
  }
}

TEST(TweedieVjp, SaturatedSoftmaxLeavesOnlyTheIdentityTerm) {
  const auto book = small_book(19, 64, 6, 10.0);
  const auto prior = AnalyticPrior::vector_space(book);
  const auto s = build_schedule(50, 0.1, 20.0, 0.1);
  const int t = 3;
  const Vec x = s.alpha(t) * book.scaled().col(2);
  const auto ev = evaluate(prior, x, t, s);
  ASSERT_DOUBLE_EQ(ev.gamma[2], 1.0);
  Rng rng(9);
  const Vec v = standard_normal(64, rng);
  const double c = s.alpha(t) * 0.01 / s.omega2(t);
  EXPECT_LT((tweedie_vjp(prior, ev, v) - c * v).norm(), 1e-12 * v.norm());
}

TEST(LatentPrior, ResponsibilitiesAreASoftmaxOfTheState) {
  const auto book = small_book(20, 16, 5);
  const double temp = 2.0;
  const auto prior = AnalyticPrior::latent_space(book, temp);
  const auto s = build_schedule(50, 0.1, 20.0, 0.2);
  Rng rng(10);
  const int t = 25;
  const Vec z = standard_normal(5, rng);
  Vec l = temp * s.alpha(t) * z / s.omega2(t);
  l.array() -= l.maxCoeff();
  Vec want = l.array().exp();
  want /= want.sum();
  EXPECT_LT((responsibilities(prior, z, t, s) - want).norm(), 1e-12);

  const auto ev = evaluate(prior, z, t, s);
  const Vec tw = tweedie(ev, z);
  const Vec hull = tw - (s.alpha(t) * 0.04 / s.omega2(t)) * z;
  EXPECT_TRUE((hull.array() >= 0.0).all());
  EXPECT_NEAR(hull.sum(), ev.beta2 / ev.omega2, 1e-12);
}

TEST(Prior, CenterMeanAndDecode) {
  const auto book = small_book(21, 8, 4);
  const auto latent = AnalyticPrior::latent_space(book);
  EXPECT_TRUE(latent.center_mean().isApprox(Vec::Constant(4, 0.25)));
  const Vec z = Vec::Unit(4, 2);
  EXPECT_TRUE(latent.decode(z).isApprox(book.scaled().col(2)));
  EXPECT_EQ(latent.readout(z).index, 2);
  EXPECT_THROW(AnalyticPrior::vector_space(book, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace facdiff
