#include <gtest/gtest.h>

#include <cmath>

#include "headlens/attention.hpp"
#include "test_util.hpp"

using namespace headlens;

TEST(SoftmaxRows, ConstantRowIsUniform) {
  const Matrix out = softmax_rows(Matrix(1, 2, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.5);
}

TEST(SoftmaxRows, LargeLogitsDoNotOverflow) {
  const Matrix out = softmax_rows(Matrix(1, 2, {1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.5);
}

TEST(SoftmaxRows, LogRatioGivesExactProbabilities) {
  const Matrix out = softmax_rows(Matrix(1, 2, {std::log(1.0), std::log(3.0)}));
  const auto expected = oracle::softmax({std::log(1.0), std::log(3.0)});
  EXPECT_NEAR(out(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.75, 1e-15);
  EXPECT_NEAR(out(0, 1), expected[1], 1e-15);
}

TEST(SoftmaxRows, RejectsNonFinite) {
  EXPECT_THROW(softmax_rows(Matrix(1, 2, {0.0, NAN})), ValidationError);
  EXPECT_THROW(softmax_rows(Matrix(1, 2, {INFINITY, 0.0})), ValidationError);
}

TEST(ComputeAttentionMap, ZeroQueriesGiveUniformRows) {
  Xoshiro256 rng(1);
  const QueryMatrix q(0, 0, 2, Matrix(4, 8));
  const KeyMatrix k(testutil::random_matrix(rng, 5, 8));
  const AttentionMap m = compute_attention_map(q, k);
  for (double v : m.values().values()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(ComputeAttentionMap, SingleQueryTwoKeys) {
  const QueryMatrix q(0, 0, 1, Matrix(1, 1, {1.0}));
  const KeyMatrix k(Matrix(2, 1, {1.0, 0.0}));
  const AttentionMap m = compute_attention_map(q, k);
  const double e = std::exp(1.0);
  EXPECT_NEAR(m.values()(0, 0), e / (e + 1.0), 1e-15);
  EXPECT_NEAR(m.values()(0, 1), 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(m.values()(0, 0), 0.7311, 1e-4);
}

TEST(ComputeAttentionMap, MatchesReferenceKernel) {
  Xoshiro256 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint32_t r = 1 + static_cast<std::uint32_t>(rng.below(6));
    const std::size_t s = 1 + rng.below(10);
    const std::size_t d = 1 + rng.below(12);
    const Matrix qm = testutil::random_matrix(rng, std::size_t{r} * r, d, 3.0);
    const Matrix km = testutil::random_matrix(rng, s, d, 3.0);
    const AttentionMap m = compute_attention_map(QueryMatrix(3, 1, r, qm), KeyMatrix(km));
    const auto ref = oracle::attention(testutil::to_grid(qm), testutil::to_grid(km));
    for (std::size_t i = 0; i < qm.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < s; ++j) {
        EXPECT_NEAR(m.values()(i, j), ref[i][j], 1e-12);
        sum += m.values()(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(ComputeAttentionMap, KeepsHeadMetadata) {
  const AttentionMap m = compute_attention_map(QueryMatrix(7, 3, 2, Matrix(4, 2)), KeyMatrix(Matrix(3, 2)));
  EXPECT_EQ(m.head_id(), 7u);
  EXPECT_EQ(m.timestep(), 3u);
  EXPECT_EQ(m.resolution(), 2u);
  EXPECT_EQ(m.token_count(), 3u);
}

TEST(ComputeAttentionMap, DkMismatchIsShapeError) {
  EXPECT_THROW(compute_attention_map(QueryMatrix(0, 0, 1, Matrix(1, 3)), KeyMatrix(Matrix(2, 4))), ShapeError);
}

TEST(QueryMatrix, Validation) {
  EXPECT_THROW(QueryMatrix(0, 0, 2, Matrix(3, 4)), ShapeError);
  EXPECT_THROW(QueryMatrix(0, 0, 2, Matrix(4, 0)), ValidationError);
  EXPECT_THROW(QueryMatrix(0, 0, 1, Matrix(1, 1, {NAN})), ValidationError);
}

TEST(AttentionMap, Validation) {
  EXPECT_THROW(AttentionMap(0, 0, 1, Matrix(1, 2, {0.6, 0.6})), ValidationError);
  EXPECT_THROW(AttentionMap(0, 0, 1, Matrix(1, 2, {1.5, -0.5})), ValidationError);
  EXPECT_THROW(AttentionMap(0, 0, 2, Matrix(1, 2, {0.5, 0.5})), ShapeError);
  EXPECT_NO_THROW(AttentionMap(0, 0, 1, Matrix(1, 2, {0.5, 0.5 + 5e-7})));
  EXPECT_THROW(AttentionMap(0, 0, 1, Matrix(1, 2, {0.5, 0.5 + 5e-6})), ValidationError);
}

TEST(TokenInfo, Validation) {
  EXPECT_THROW(TokenInfo({"a", "b"}, {}), ValidationError);
  EXPECT_THROW(TokenInfo({"a", "b"}, {2}), ValidationError);
  EXPECT_THROW(TokenInfo({"a", "b", "c"}, {2, 1}), ValidationError);
  EXPECT_EQ(TokenInfo({"<s>", "ele", "phant"}, {1, 2}).target_label(), "ele+phant");
}
