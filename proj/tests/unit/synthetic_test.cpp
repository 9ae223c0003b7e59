#include <gtest/gtest.h>

#include "headlens/headlens.hpp"
#include "test_util.hpp"

using namespace headlens;

namespace {

synth::FixtureConfig small_config() {
  synth::FixtureConfig cfg;
  cfg.head_count = 24;
  cfg.planted_count = 6;
  cfg.image_count = 3;
  cfg.timesteps = 2;
  cfg.resolution_choices = {4, 8};
  cfg.gt_resolution = 32;
  return cfg;
}

}  // namespace

TEST(FixtureConfig, Validation) {
  auto bad = [](auto edit) {
    synth::FixtureConfig cfg = small_config();
    edit(cfg);
    return cfg;
  };
  EXPECT_NO_THROW(synth::validate(small_config()));
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.planted_count = c.head_count; })), ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) {
                 c.ambiguous = true;
                 c.planted_count = 12;
               })),
               ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.token_count = 4; })), ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.d_k = 10; })), ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.target_mass = 0.1; })), ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.resolution_choices = {64}; })), ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.noise = -1.0; })), ValidationError);
  EXPECT_THROW(synth::validate(bad([](auto& c) { c.coverage_min = 0.9; })), ValidationError);
}

TEST(Fixture, PlantedSetsAndRoles) {
  const synth::FixtureGenerator gen(small_config());
  ASSERT_EQ(gen.truth().planted.size(), 1u);
  const HeadSet& planted = gen.truth().planted[0];
  EXPECT_EQ(planted.size(), 6u);
  for (std::uint32_t h = 0; h < 24; ++h) {
    EXPECT_EQ(gen.heads()[h].role == synth::HeadRole::kPlanted, planted.contains(h));
  }
}

TEST(Fixture, DeterministicPerImage) {
  const synth::FixtureGenerator a(small_config());
  const synth::FixtureGenerator b(small_config());
  EXPECT_EQ(atnd::encode(a.image(1).dump), atnd::encode(b.image(1).dump));
  EXPECT_EQ(a.image(2).gt_masks, b.image(2).gt_masks);
  EXPECT_NE(atnd::encode(a.image(0).dump), atnd::encode(a.image(1).dump));
  synth::FixtureConfig other = small_config();
  other.seed += 1;
  EXPECT_NE(atnd::encode(synth::FixtureGenerator(other).image(0).dump), atnd::encode(a.image(0).dump));
}

TEST(Fixture, CalibratedTargetMassWithoutNoise) {
  synth::FixtureConfig cfg = small_config();
  cfg.noise = 0.0;
  cfg.coverage_min = cfg.coverage_max = -1.0;  // planted heads cover the whole ellipse
  const synth::FixtureGenerator gen(cfg);
  const synth::FixtureImage img = gen.image(0);
  const std::size_t target = gen.target_token_index();
  const auto maps = time_averaged_head_maps(img.dump);
  const double expected_out = synth::background_target_mass(cfg);
  for (auto h : gen.truth().planted[0].ids()) {
    const AttentionMap& m = maps[h];
    double peak = 0.0;
    double low = 1.0;
    for (std::size_t p = 0; p < m.values().rows(); ++p) {
      peak = std::max(peak, m.values()(p, target));
      low = std::min(low, m.values()(p, target));
    }
    EXPECT_NEAR(peak, cfg.target_mass, 1e-6) << "head " << h;
    EXPECT_NEAR(low, expected_out, 1e-6) << "head " << h;
  }
}

TEST(Fixture, ConceptKeysVoteForPlantedConcept) {
  synth::FixtureConfig cfg = small_config();
  const synth::FixtureGenerator gen(cfg);
  const atnd::Dump ck = gen.concept_key_dump();
  EXPECT_EQ(ck.token_count, cfg.concept_count);
  EXPECT_EQ(ck.labels[0], "animals");
  VoteAccumulator acc(atnd::concept_names(ck), cfg.head_count);
  accumulate_hrv_votes(gen.image(0).dump, ck, acc);
  for (auto h : gen.truth().planted[0].ids()) EXPECT_EQ(acc.count(0, h), cfg.timesteps) << "head " << h;
}

TEST(Fixture, RecoveryOnSmallFixture) {
  const synth::FixtureGenerator gen(small_config());
  const atnd::Dump ck = gen.concept_key_dump();
  VoteAccumulator acc(atnd::concept_names(ck), 24);
  for (std::size_t i = 0; i < 3; ++i) accumulate_hrv_votes(gen.image(i).dump, ck, acc);
  const auto hrvs = finalize_hrv(acc);
  EXPECT_EQ(synth::planted_recovery(gen.truth(), hrvs[0], 0), 1.0);
}

TEST(Fixture, RecoveryRateBounds) {
  const synth::FixtureGenerator gen(small_config());
  HeadRelevanceVector perfect{"animals", std::vector<double>(24, 0.0), false};
  HeadRelevanceVector disjoint{"animals", std::vector<double>(24, 1.0), false};
  for (auto h : gen.truth().planted[0].ids()) {
    perfect.weights[h] = 1.0;
    disjoint.weights[h] = 0.0;
  }
  EXPECT_EQ(synth::planted_recovery(gen.truth(), perfect, 0), 1.0);
  EXPECT_EQ(synth::planted_recovery(gen.truth(), disjoint, 0), 0.0);
  EXPECT_THROW(synth::planted_recovery(gen.truth(), HeadRelevanceVector{"x", {1.0}, false}, 0), ValidationError);
}

TEST(Fixture, AlmostAllPlantedDegenerateCase) {
  // planted = H - 1 with no noise: top-H is every head and selective equals DAAM.
  synth::FixtureConfig cfg = small_config();
  cfg.head_count = 8;
  cfg.planted_count = 7;
  cfg.noise = 0.0;
  cfg.image_count = 1;
  const synth::FixtureGenerator gen(cfg);
  const synth::FixtureImage img = gen.image(0);
  const atnd::Dump ck = gen.concept_key_dump();
  VoteAccumulator acc(atnd::concept_names(ck), 8);
  accumulate_hrv_votes(img.dump, ck, acc);
  const auto hrvs = finalize_hrv(acc);
  EXPECT_EQ(top_k_heads(hrvs[0], 8).ids(), HeadSet::all(8).ids());
  EXPECT_EQ(synth::planted_recovery(gen.truth(), hrvs[0], 0), 1.0);
  const auto maps = time_averaged_head_maps(img.dump);
  EXPECT_EQ(aggregate_selective(maps, top_k_heads(hrvs[0], 8), 32), aggregate_daam(maps, 8, 32));
}

TEST(Fixture, AmbiguousConceptsAreDisjoint) {
  synth::FixtureConfig cfg = small_config();
  cfg.ambiguous = true;
  const synth::FixtureGenerator gen(cfg);
  EXPECT_EQ(gen.truth().planted.size(), 2u);
  const synth::FixtureImage img = gen.image(0);
  ASSERT_EQ(img.gt_masks.size(), 2u);
  EXPECT_EQ(iou(img.gt_masks[0], img.gt_masks[1]), 0.0);
  EXPECT_EQ(img.manifest.token_info().target_label(), "mouse");
}

TEST(Fixture, RasterizeNeverEmpty) {
  synth::Region tiny;
  tiny.ax = tiny.ay = 0.01;
  tiny.nx = 1.0;
  tiny.cut = 0.5;
  const auto bits = synth::rasterize_nonempty(tiny, 8);
  EXPECT_EQ(std::count(bits.begin(), bits.end(), 1), 1);
}

TEST(Fixture, TruthJsonRoundTrip) {
  synth::FixtureConfig cfg = small_config();
  cfg.ambiguous = true;
  cfg.planted_count = 5;
  const synth::FixtureGenerator gen(cfg);
  const auto dir = testutil::temp_dir("truth");
  std::ofstream(dir / "truth.json") << synth::truth_to_json(gen.truth(), cfg).dump(2);
  const synth::FixtureTruth back = synth::read_truth(dir / "truth.json");
  EXPECT_EQ(back.head_count, 24u);
  ASSERT_EQ(back.planted.size(), 2u);
  EXPECT_EQ(back.concept_names[0], "animals");
  EXPECT_EQ(back.planted[1].ids(), gen.truth().planted[1].ids());
  EXPECT_EQ(back.image_ids, gen.truth().image_ids);
}
