// Generates a small synthetic benchmark in memory, estimates head relevance from it and
// checks how many planted heads come out on top.
//
//   sample_fixture_report [images] [seed]

#include <cstdio>
#include <cstdlib>

#include "headlens/headlens.hpp"

using namespace headlens;

int main(int argc, char** argv) {
  synth::FixtureConfig cfg;
  cfg.image_count = argc > 1 ? static_cast<std::uint32_t>(std::atoi(argv[1])) : 4;
  if (argc > 2) cfg.seed = std::strtoull(argv[2], nullptr, 10);

  const synth::FixtureGenerator gen(cfg);
  const atnd::Dump concept_keys = gen.concept_key_dump();
  VoteAccumulator votes(atnd::concept_names(concept_keys), cfg.head_count);

  std::vector<synth::FixtureImage> images;
  std::vector<std::vector<AttentionMap>> maps;
  for (std::uint32_t i = 0; i < cfg.image_count; ++i) {
    images.push_back(gen.image(i));
    accumulate_hrv_votes(images.back().dump, concept_keys, votes);
    maps.push_back(time_averaged_head_maps(images.back().dump));
  }
  const auto hrvs = finalize_hrv(votes);
  const auto& animals = find_concept(hrvs, "animals");
  std::printf("planted heads recovered in top-%u: %.0f%%\n", cfg.planted_count,
              100.0 * synth::planted_recovery(gen.truth(), animals, 0));

  const HeadSet top = top_k_heads(animals, cfg.planted_count);
  std::vector<EvalRecord> records;
  for (std::uint32_t i = 0; i < cfg.image_count; ++i) {
    const synth::FixtureImage& img = images[i];
    const AggregatedMap daam = aggregate_daam(maps[i], cfg.head_count);
    const AggregatedMap selective = aggregate_selective(maps[i], top);
    const auto r = evaluate_image(img.manifest.image_id, {{"top", &selective}, {"all", &daam}},
                                  img.manifest.token_info(), img.gt_masks[0], {0.4});
    records.insert(records.end(), r.begin(), r.end());
  }
  std::printf("%s\n", summarize(records, {"top", "all"}, {0.4}).dump(2).c_str());
}
