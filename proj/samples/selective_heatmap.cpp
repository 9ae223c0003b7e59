// Builds attention maps for a toy model with random queries and keys, then compares the
// all-heads average with an average over a hand-picked head subset.

#include <cstdio>
#include <vector>

#include "headlens/headlens.hpp"

using namespace headlens;

namespace {

Matrix random_matrix(Xoshiro256& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace

int main() {
  constexpr std::uint32_t kHeads = 4;
  constexpr std::uint32_t kSteps = 3;
  constexpr std::size_t kTokens = 5;
  constexpr std::size_t kDk = 8;
  const std::uint32_t resolutions[kHeads] = {8, 16, 8, 16};

  Xoshiro256 rng(7);
  const TokenInfo tokens({"<|startoftext|>", "a", "photo", "of", "cat"}, {4});

  std::vector<AttentionMap> per_head;
  for (std::uint32_t h = 0; h < kHeads; ++h) {
    const std::uint32_t r = resolutions[h];
    const KeyMatrix keys(random_matrix(rng, kTokens, kDk));
    std::vector<AttentionMap> steps;
    for (std::uint32_t t = 0; t < kSteps; ++t) {
      const QueryMatrix q(h, t, r, random_matrix(rng, std::size_t{r} * r, kDk));
      steps.push_back(compute_attention_map(q, keys));
    }
    per_head.push_back(time_average(steps));
  }

  const AggregatedMap all = aggregate_daam(per_head, kHeads, 32);
  const AggregatedMap picked = aggregate_selective(per_head, HeadSet({1, 3}, kHeads), 32);

  for (const auto* agg : {&all, &picked}) {
    const TokenHeatmap heat = extract_token_heatmap(*agg, tokens);
    const BinaryMask mask = threshold_mask(heat, 0.5);
    std::printf("%s: %zu of %zu pixels >= 0.5 for '%s'\n", agg == &all ? "all heads" : "heads {1,3}",
                mask.count(), mask.pixel_count(), tokens.target_label().c_str());
  }
}
