#include <gtest/gtest.h>

#include "headlens/aggregation.hpp"
#include "test_util.hpp"

using namespace headlens;

namespace {

AttentionMap random_map(Xoshiro256& rng, std::uint32_t head, std::uint32_t r, std::size_t s,
                        std::uint32_t t = 0) {
  return AttentionMap(head, t, r, testutil::random_stochastic(rng, std::size_t{r} * r, s));
}

std::vector<AttentionMap> random_heads(Xoshiro256& rng, std::uint32_t h_count, std::size_t s) {
  std::vector<AttentionMap> out;
  const std::uint32_t res[] = {2, 4, 8, 16};
  for (std::uint32_t h = 0; h < h_count; ++h) out.push_back(random_map(rng, h, res[rng.below(4)], s));
  return out;
}

}  // namespace

TEST(HeadSet, SortsAndValidates) {
  const HeadSet set({5, 1, 3}, 8);
  EXPECT_EQ(set.ids(), (std::vector<std::uint32_t>{1, 3, 5}));
  EXPECT_TRUE(set.contains(3));
  EXPECT_FALSE(set.contains(4));
  EXPECT_THROW(HeadSet({}, 8), ValidationError);
  EXPECT_THROW(HeadSet({1, 1}, 8), ValidationError);
  EXPECT_THROW(HeadSet({8}, 8), ValidationError);
  EXPECT_EQ(HeadSet::all(4).ids(), (std::vector<std::uint32_t>{0, 1, 2, 3}));
}

TEST(TimeAverage, SingleStepIsIdentity) {
  Xoshiro256 rng(1);
  const std::vector<AttentionMap> one{random_map(rng, 2, 4, 3)};
  EXPECT_EQ(time_average(one).values(), one[0].values());
}

TEST(TimeAverage, TwoOneHotRows) {
  const std::vector<AttentionMap> maps{AttentionMap(0, 0, 1, Matrix(1, 2, {1.0, 0.0})),
                                       AttentionMap(0, 1, 1, Matrix(1, 2, {0.0, 1.0}))};
  const AttentionMap avg = time_average(maps);
  EXPECT_DOUBLE_EQ(avg.values()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(avg.values()(0, 1), 0.5);
}

TEST(TimeAverage, MatchesBruteForceMean) {
  Xoshiro256 rng(2);
  std::vector<AttentionMap> maps;
  for (std::uint32_t t = 0; t < 5; ++t) maps.push_back(random_map(rng, 0, 4, 6, t));
  const AttentionMap avg = time_average(maps);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t s = 0; s < 6; ++s) {
      double sum = 0.0;
      for (const auto& m : maps) sum += m.values()(i, s);
      EXPECT_NEAR(avg.values()(i, s), sum / 5.0, 1e-12);
    }
  }
}

TEST(TimeAverage, RejectsMixedShapes) {
  Xoshiro256 rng(3);
  std::vector<AttentionMap> maps{random_map(rng, 0, 4, 3), random_map(rng, 0, 2, 3)};
  EXPECT_THROW(time_average(maps), ShapeError);
  EXPECT_THROW(time_average(std::span<const AttentionMap>{}), ValidationError);
}

TEST(AggregateDaam, SingleHeadAtTargetResolution) {
  Xoshiro256 rng(4);
  const std::vector<AttentionMap> maps{random_map(rng, 0, 8, 3)};
  const AggregatedMap agg = aggregate_daam(maps, 1, 8);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t p = 0; p < 64; ++p) EXPECT_EQ(agg.slice_values(s)[p], maps[0].values()(p, s));
  }
}

TEST(AggregateDaam, TwoHeadsAverage) {
  Xoshiro256 rng(5);
  const std::vector<AttentionMap> maps{random_map(rng, 0, 4, 2), random_map(rng, 1, 4, 2)};
  const AggregatedMap agg = aggregate_daam(maps, 2, 4);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t p = 0; p < 16; ++p) {
      EXPECT_NEAR(agg.slice_values(s)[p], (maps[0].values()(p, s) + maps[1].values()(p, s)) / 2, 1e-15);
    }
  }
}

TEST(AggregateDaam, MatchesReferenceUpscaleAndMean) {
  Xoshiro256 rng(6);
  const auto maps = random_heads(rng, 6, 4);
  const AggregatedMap agg = aggregate_daam(maps, 6, 32);
  for (std::size_t s = 0; s < 4; ++s) {
    std::vector<double> expect(32 * 32, 0.0);
    for (const auto& m : maps) {
      const auto up = oracle::bicubic(testutil::to_grid(token_slice(m, s)), 32, 32);
      for (std::size_t p = 0; p < expect.size(); ++p) expect[p] += up[p / 32][p % 32] / 6.0;
    }
    for (std::size_t p = 0; p < expect.size(); ++p) EXPECT_NEAR(agg.slice_values(s)[p], expect[p], 1e-12);
  }
}

TEST(AggregateDaam, MissingHeadsAreListed) {
  Xoshiro256 rng(7);
  auto maps = random_heads(rng, 5, 3);
  maps.erase(maps.begin() + 1);
  maps.erase(maps.begin() + 2);
  try {
    aggregate_daam(maps, 5, 16);
    FAIL() << "expected CompletenessError";
  } catch (const CompletenessError& e) {
    EXPECT_NE(std::string(e.what()).find("1,3"), std::string::npos) << e.what();
  }
}

TEST(AggregateDaam, RejectsDownscaleAndBadTarget) {
  Xoshiro256 rng(8);
  const std::vector<AttentionMap> maps{random_map(rng, 0, 16, 2)};
  EXPECT_THROW(aggregate_daam(maps, 1, 8), ValidationError);
  EXPECT_THROW(aggregate_daam(maps, 1, 0), ValidationError);
  EXPECT_THROW(aggregate_daam(maps, 1, kMaxTargetResolution + 1), ValidationError);
}

TEST(AggregateSelective, AllHeadsEqualsDaamBitwise) {
  Xoshiro256 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    auto maps = random_heads(rng, 7, 5);
    std::reverse(maps.begin(), maps.end());  // input order must not matter
    EXPECT_EQ(aggregate_selective(maps, HeadSet::all(7), 16), aggregate_daam(maps, 7, 16));
  }
}

TEST(AggregateSelective, SingletonIsThatHeadUpscaled) {
  Xoshiro256 rng(10);
  const auto maps = random_heads(rng, 4, 3);
  const AggregatedMap agg = aggregate_selective(maps, HeadSet({2}, 4), 32);
  for (std::size_t s = 0; s < 3; ++s) {
    const Matrix up = bicubic_upscale(token_slice(maps[2], s), 32);
    for (std::size_t p = 0; p < 32 * 32; ++p) EXPECT_EQ(agg.slice_values(s)[p], up.values()[p]);
  }
}

TEST(AggregateSelective, UnavailableHeads) {
  Xoshiro256 rng(11);
  const auto maps = random_heads(rng, 3, 2);
  EXPECT_THROW(aggregate_selective(std::span(maps).first(2), HeadSet({0, 2}, 3), 16), CompletenessError);
}

TEST(ExtractTokenHeatmap, MaxNormalizes) {
  std::vector<double> v(2 * 2 * 2, 0.0);
  v[4] = 0.01;
  v[5] = 0.04;
  v[6] = 0.02;
  const AggregatedMap agg(2, 2, v);
  const TokenHeatmap heat = extract_token_heatmap(agg, TokenInfo({"a", "b"}, {1}));
  EXPECT_DOUBLE_EQ(heat.values()(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(heat.values()(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(heat.values()(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(heat.values()(1, 1), 0.0);
}

TEST(ExtractTokenHeatmap, ZeroSliceStaysZero) {
  const AggregatedMap agg(4, 2, std::vector<double>(32, 0.0));
  const TokenHeatmap heat = extract_token_heatmap(agg, TokenInfo({"a", "b"}, {0}));
  for (double v : heat.values().values()) EXPECT_EQ(v, 0.0);
}

TEST(ExtractTokenHeatmap, MultiTokenMeanThenScale) {
  Xoshiro256 rng(12);
  std::vector<double> v(4 * 4 * 3);
  for (double& x : v) x = rng.uniform();
  const AggregatedMap agg(4, 3, v);
  const TokenHeatmap heat = extract_token_heatmap(agg, TokenInfo({"a", "b", "c"}, {0, 2}));
  std::vector<double> mean(16);
  double peak = 0.0;
  for (std::size_t p = 0; p < 16; ++p) peak = std::max(peak, mean[p] = (v[p] + v[32 + p]) / 2.0);
  for (std::size_t p = 0; p < 16; ++p) EXPECT_NEAR(heat.values().values()[p], mean[p] / peak, 1e-12);
}

TEST(ExtractTokenHeatmap, UpscalesBeforeNormalizing) {
  Xoshiro256 rng(13);
  std::vector<double> v(4 * 4);
  for (double& x : v) x = rng.uniform();
  const AggregatedMap agg(4, 1, v);
  const TokenHeatmap heat = extract_token_heatmap(agg, TokenInfo({"a"}, {0}), 16);
  ASSERT_EQ(heat.resolution(), 16u);
  const auto up = oracle::bicubic(testutil::to_grid(Matrix(4, 4, v)), 16, 16);
  double peak = 0.0;
  for (const auto& row : up) peak = std::max(peak, *std::max_element(row.begin(), row.end()));
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) EXPECT_NEAR(heat.values()(y, x), up[y][x] / peak, 1e-12);
  }
}

TEST(ExtractTokenHeatmap, IndexOutOfRange) {
  const AggregatedMap agg(2, 2, std::vector<double>(8, 0.1));
  EXPECT_THROW(extract_token_heatmap(agg, TokenInfo({"a", "b", "c"}, {2})), ValidationError);
}

TEST(AggregatedMap, Validation) {
  EXPECT_THROW(AggregatedMap(2, 2, std::vector<double>(7, 0.0)), ShapeError);
  EXPECT_THROW(AggregatedMap(1, 1, {-0.1}), ValidationError);
  EXPECT_THROW(AggregatedMap(0, 1, {}), ValidationError);
}
