#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "facdiff/serialize.hpp"
#include "facdiff/vsa.hpp"
#include "test_util.hpp"

namespace facdiff {
namespace {

TEST(Codebook, SingleColumnOfDimFourHasNormTwo) {
  const auto books = generate_codebooks(7, 4, 1, 1, 1.0);
  ASSERT_EQ(books.size(), 1u);
  EXPECT_EQ(books[0].dim(), 4);
  EXPECT_EQ(books[0].size(), 1);
  EXPECT_DOUBLE_EQ(books[0].raw().col(0).norm(), 2.0);
  EXPECT_DOUBLE_EQ(books[0].column_norm(), 2.0);
}

TEST(Codebook, ScaledColumnsHaveMagnitudeOneThousand) {
  const auto books = generate_codebooks(3, 1000, 50, 3, 1000.0 / std::sqrt(1000.0));
  for (const auto& b : books) {
    for (Eigen::Index c = 0; c < b.size(); ++c) {
      EXPECT_NEAR(b.scaled().col(c).norm(), 1000.0, 1e-9);
    }
  }
}

TEST(Codebook, SameSeedGivesIdenticalBooks) {
  const auto a = generate_codebooks(7, 64, 10, 3, 1.0);
  const auto b = generate_codebooks(7, 64, 10, 3, 1.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(a[k] == b[k]);
  const auto c = generate_codebooks(8, 64, 10, 3, 1.0);
  EXPECT_FALSE(a[0] == c[0]);
}

TEST(Codebook, ColumnsAreDistinctAndBipolar) {
  // D=3 has only 8 distinct columns; asking for all of them forces resampling.
  const auto books = generate_codebooks(11, 3, 8, 2, 1.0);
  for (const auto& b : books) {
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      for (Eigen::Index j = i + 1; j < b.size(); ++j) {
        EXPECT_FALSE(b.raw().col(i) == b.raw().col(j));
      }
    }
    EXPECT_TRUE((b.raw().array().abs() == 1.0).all());
  }
}

TEST(Codebook, RejectsImpossibleRequests) {
  EXPECT_THROW(generate_codebooks(1, 3, 9, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(generate_codebooks(1, 0, 2, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(generate_codebooks(1, 4, 2, 1, 0.0), std::invalid_argument);
  Mat bad = Mat::Ones(2, 2);
  bad(0, 0) = 0.5;
  EXPECT_THROW(Codebook(bad, 1.0), std::invalid_argument);
}

TEST(Bind, SelfBindingIsAllOnes) {
  Rng rng(5);
  const Vec x = testing::random_bipolar(32, 1, rng).col(0);
  const std::vector<Vec> vs = {x, x};
  EXPECT_TRUE(facdiff::bind(vs).isOnes());
}

TEST(Bind, Componentwise) {
  const std::vector<Vec> vs = {(Vec(3) << 1, -1, 1).finished(), (Vec(3) << -1, -1, 1).finished()};
  EXPECT_EQ(facdiff::bind(vs), (Vec(3) << -1, 1, 1).finished());
}

TEST(Bind, OrderDoesNotMatter) {
  Rng rng(9);
  std::vector<Vec> vs;
  for (int i = 0; i < 4; ++i) vs.push_back(testing::random_bipolar(16, 1, rng).col(0));
  const Vec ref = facdiff::bind(vs);
  std::sort(vs.begin(), vs.end(), [](const Vec& a, const Vec& b) { return a[0] < b[0]; });
  EXPECT_EQ(facdiff::bind(vs), ref);
  std::reverse(vs.begin(), vs.end());
  EXPECT_EQ(facdiff::bind(vs), ref);
}

TEST(Bind, RejectsBadInput) {
  EXPECT_THROW(facdiff::bind(std::vector<Vec>{}), std::invalid_argument);
  EXPECT_THROW(facdiff::bind(std::vector<Vec>{Vec::Ones(3), Vec::Ones(4)}), std::invalid_argument);
}

TEST(Bind, IsSelfInverse) {
  Rng rng(2);
  const Mat m = testing::random_bipolar(40, 3, rng);
  const std::vector<Vec> abc = {m.col(0), m.col(1), m.col(2)};
  const Vec bound = facdiff::bind(abc);
  const std::vector<Vec> unbind = {bound, m.col(1), m.col(2)};
  EXPECT_EQ(facdiff::bind(unbind), Vec(m.col(0)));
}

TEST(Instance, NoiselessObservationIsScaledBoundVector) {
  const double scale = 2.0;
  auto books = generate_codebooks(4, 50, 5, 3, scale);
  const auto inst = make_instance(books, {1, 2, 3}, 1, 99);
  EXPECT_EQ(inst.noise_sigma, 0.0);
  EXPECT_DOUBLE_EQ(inst.observation_scale, 8.0);
  std::vector<Vec> f = {books[0].raw().col(1), books[1].raw().col(2), books[2].raw().col(3)};
  EXPECT_TRUE(inst.observation.isApprox(8.0 * facdiff::bind(f)));
  // The scaled factors compose to the observation.
  std::vector<Vec> s = {books[0].scaled().col(1), books[1].scaled().col(2),
                        books[2].scaled().col(3)};
  EXPECT_TRUE(inst.observation.isApprox(facdiff::bind(s)));
}

TEST(Instance, NoiseSigmaFollowsSuperpositionCount) {
  auto books = generate_codebooks(4, 20, 3, 2, 1.0);
  EXPECT_DOUBLE_EQ(make_instance(books, {0, 1}, 4, 1).noise_sigma, std::sqrt(3.0));
  EXPECT_DOUBLE_EQ(make_instance(books, {0, 1}, 2, 1).noise_sigma, 1.0);
  EXPECT_THROW(make_instance(books, {0, 1}, 0, 1), std::invalid_argument);
  EXPECT_THROW(make_instance(books, {0, 3}, 1, 1), std::invalid_argument);
  EXPECT_THROW(make_instance(books, {0}, 1, 1), std::invalid_argument);
}

TEST(Instance, SingleScalingUsesOneFactorOfScale) {
  auto books = generate_codebooks(4, 20, 3, 3, 3.0);
  const auto inst = make_instance(books, {0, 1, 2}, 1, 1, ObservationScaling::single);
  EXPECT_DOUBLE_EQ(inst.observation_scale, 3.0);
}

TEST(Instance, NoiseVarianceMatchesSigma) {
  auto books = generate_codebooks(4, 20000, 2, 2, 1.0);
  const auto inst = make_instance(books, {0, 1}, 5, 17);
  std::vector<Vec> f = {books[0].raw().col(0), books[1].raw().col(1)};
  const Vec noise = inst.observation - facdiff::bind(f);
  const double var = noise.squaredNorm() / static_cast<double>(noise.size());
  EXPECT_NEAR(var, 4.0, 4.0 * 5.0 * std::sqrt(2.0 / 20000.0));
}

TEST(Cleanup, SelfSimilarity) {
  auto books = generate_codebooks(6, 64, 8, 1, 1.0);
  const auto r = cleanup(books[0], books[0].raw().col(3));
  EXPECT_EQ(r.index, 3);
  EXPECT_NEAR(r.similarity, 1.0, 1e-12);
  EXPECT_FALSE(r.degenerate);
}

TEST(Cleanup, SingleCandidateReportsNegativeSimilarity) {
  auto books = generate_codebooks(6, 64, 1, 1, 1.0);
  const auto r = cleanup(books[0], -books[0].raw().col(0));
  EXPECT_EQ(r.index, 0);
  EXPECT_NEAR(r.similarity, -1.0, 1e-12);
}

TEST(Cleanup, ZeroEstimateIsDegenerate) {
  auto books = generate_codebooks(6, 16, 4, 1, 1.0);
  const auto r = cleanup(books[0], Vec::Zero(16));
  EXPECT_EQ(r.index, 0);
  EXPECT_EQ(r.similarity, 0.0);
  EXPECT_TRUE(r.degenerate);
}

TEST(Cleanup, MatchesExhaustiveArgmax) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat cols = testing::random_bipolar(12, 6, rng);
    const Vec est = standard_normal(12, rng);
    int best = 0;
    for (int c = 1; c < 6; ++c) {
      if (cols.col(c).dot(est) > cols.col(best).dot(est)) best = c;
    }
    EXPECT_EQ(cleanup(cols, est).index, best);
  }
}

TEST(Cleanup, MagnitudeReadoutIgnoresSign) {
  auto books = generate_codebooks(6, 64, 8, 1, 1.0);
  const auto r = cleanup_magnitude(books[0].raw(), -books[0].raw().col(5));
  EXPECT_EQ(r.index, 5);
  EXPECT_NEAR(r.similarity, -1.0, 1e-12);
}

TEST(Accuracy, FractionOfFactors) {
  auto books = generate_codebooks(1, 16, 4, 4, 1.0);
  const auto inst = make_instance(books, {0, 1, 2, 3}, 1, 1);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{0, 1, 2, 3}, inst), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 2, 3, 0}, inst), 0.0);
  auto books3 = generate_codebooks(1, 16, 4, 3, 1.0);
  const auto inst3 = make_instance(books3, {0, 1, 2}, 1, 1);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{0, 1, 3}, inst3), 2.0 / 3.0);
  EXPECT_THROW(accuracy(std::vector<int>{0, 1}, inst3), std::invalid_argument);
}

TEST(Accuracy, ReconstructionSimilarityIsOneAtTruth) {
  const auto inst = random_instance(3, 256, 8, 3, 1, 1.0);
  EXPECT_NEAR(reconstruction_similarity(inst, inst.true_indices), 1.0, 1e-12);
}

TEST(Serialize, CodebookRoundTrip) {
  const auto books = generate_codebooks(5, 17, 4, 1, 0.3);
  const Codebook back = codebook_from_json(codebook_to_json(books[0]));
  EXPECT_TRUE(back == books[0]);
}

TEST(Serialize, InstanceRoundTripIsBitExact) {
  const auto inst = random_instance(12, 40, 5, 3, 3, 1000.0 / std::sqrt(40.0));
  const auto back = instance_from_json(instance_to_json(inst));
  EXPECT_EQ(back.true_indices, inst.true_indices);
  EXPECT_EQ(back.observation, inst.observation);
  EXPECT_EQ(back.noise_sigma, inst.noise_sigma);
  EXPECT_EQ(back.observation_scale, inst.observation_scale);
  ASSERT_EQ(back.codebooks.size(), inst.codebooks.size());
  for (std::size_t k = 0; k < inst.codebooks.size(); ++k) {
    EXPECT_TRUE(back.codebooks[k] == inst.codebooks[k]);
  }
}

TEST(Serialize, RejectsMalformedJson) {
  EXPECT_ANY_THROW(codebook_from_json("{"));
  EXPECT_ANY_THROW(instance_from_json("{\"codebooks\": 3}"));
}

}  // namespace
}  // namespace facdiff
