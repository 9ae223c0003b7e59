#pragma once

// Writes a synthetic benchmark to disk:
//
//   <root>/concept_keys.atnd       kind 2, labelled with concept names
//   <root>/truth.json              planted head ids per concept
//   <root>/dumps/<id>.atnd         kind 1 raw Q/K, labelled with prompt tokens
//   <root>/masks/<id>.pgm          ground truth of the target word
//   <root>/masks/<id>.c<k>.pgm     ground truth of planted concept k > 0 (ambiguous fixtures)
//   <root>/images/<id>.png
//   <root>/manifests/<id>.json
//
// Requires libpng.

#include <filesystem>
#include <fstream>

#include "headlens/atnd.hpp"
#include "headlens/manifest.hpp"
#include "headlens/mask_io.hpp"
#include "headlens/overlay.hpp"
#include "headlens/pipeline.hpp"
#include "headlens/synthetic.hpp"

namespace headlens::synth {

inline void write_fixture_image(const FixtureGenerator& gen, std::size_t index, const FixtureLayout& layout) {
  FixtureImage img = gen.image(index);
  const std::string id = img.manifest.image_id;
  atnd::write(img.dump, layout.dumps() / (id + ".atnd"));
  write_mask(img.gt_masks[0], layout.masks() / (id + ".pgm"));
  for (std::size_t k = 1; k < img.gt_masks.size(); ++k) {
    write_mask(img.gt_masks[k], layout.masks() / (id + ".c" + std::to_string(k) + ".pgm"));
  }
  write_png(img.image, layout.images() / (id + ".png"));
  img.manifest.dump_path = "../dumps/" + id + ".atnd";
  img.manifest.gt_mask_path = "../masks/" + id + ".pgm";
  img.manifest.image_path = "../images/" + id + ".png";
  write_manifest(img.manifest, layout.manifests() / (id + ".json"));
}

/// Generates every image (in parallel when jobs > 1); files are identical for any job count.
inline void write_fixture(const FixtureGenerator& gen, const std::filesystem::path& root, std::size_t jobs = 1) {
  const FixtureLayout layout{root};
  std::error_code ec;
  for (const auto& dir : {layout.dumps(), layout.masks(), layout.images(), layout.manifests()}) {
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  atnd::write(gen.concept_key_dump(), layout.concept_keys());
  {
    std::ofstream out(layout.truth(), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + layout.truth().string());
    out << truth_to_json(gen.truth(), gen.config()).dump(2) << '\n';
  }
  parallel_map(gen.config().image_count, jobs, [&](std::size_t i) {
    write_fixture_image(gen, i, layout);
    return 0;
  });
}

}  // namespace headlens::synth
