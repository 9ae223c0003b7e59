#pragma once

// Deterministic synthetic benchmark with planted concept-relevant heads.
//
// Every head h owns an orthonormal basis of R^{d_k}. Concept c is keyed along basis vector
// c, each non-target prompt token along its own vector, and the target token along the
// normalized sum of the planted concepts' vectors and a "leak" vector. Keys have norm
// sqrt(d_k), so the logit of query q against a key is simply q's coefficient on the key's
// direction. Outside its active region every head attends a sink token (index 0).
//
//  - planted heads attend the target concept inside a random part of the ground-truth
//    ellipse; their target-token logit there is calibrated so the in-region mass equals
//    `target_mass`;
//  - leaky heads attend a random concept (re-drawn per image) plus the target token in an
//    enlarged, shifted copy of the ground-truth ellipse;
//  - the remaining heads attend a fixed distractor concept and token in a random region.
//
// Gaussian noise of std `noise` is added to every query entry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "headlens/aggregation.hpp"
#include "headlens/atnd.hpp"
#include "headlens/error.hpp"
#include "headlens/hrv.hpp"
#include "headlens/image.hpp"
#include "headlens/manifest.hpp"
#include "headlens/matrix.hpp"
#include "headlens/rng.hpp"
#include "headlens/seg_eval.hpp"

namespace headlens::synth {

inline constexpr std::uint64_t kDefaultSeed = 20250611;

struct FixtureConfig {
  std::uint32_t head_count = 128;
  std::uint32_t timesteps = 5;
  std::uint32_t token_count = 8;
  std::uint32_t d_k = 16;
  std::uint32_t concept_count = 8;
  std::vector<std::uint32_t> resolution_choices = {8, 16, 32, 64};
  std::uint32_t planted_count = 30;
  std::uint32_t image_count = 20;
  double noise = 0.1;
  std::uint64_t seed = kDefaultSeed;
  double target_mass = 0.75;       // planted in-region target-token mass at noise 0
  double background_logit = 3.0;   // sink-token logit outside active regions
  double leaky_fraction = 0.3;     // share of non-planted heads that are leaky
  double coverage_min = -0.3;      // planted part: half-plane offset drawn from
  double coverage_max = 0.6;       //   [coverage_min, coverage_max] * extent
  std::uint32_t gt_resolution = 64;
  bool ambiguous = false;          // second planted concept, disjoint region ("mouse" case)
};

/// Target-token logit giving in-region mass `target_mass` against S-1 zero logits.
inline double calibrated_target_logit(const FixtureConfig& cfg) {
  const double s = cfg.token_count;
  return std::log(cfg.target_mass * (s - 1.0) / (1.0 - cfg.target_mass));
}

/// Target-token mass of a head attending only the sink token.
inline double background_target_mass(const FixtureConfig& cfg) {
  return 1.0 / (std::exp(cfg.background_logit) + cfg.token_count - 1.0);
}

inline std::uint32_t planted_concept_count(const FixtureConfig& cfg) { return cfg.ambiguous ? 2 : 1; }

inline void validate(const FixtureConfig& cfg) {
  auto fail = [](const std::string& what) { throw ValidationError("fixture: " + what); };
  if (cfg.head_count == 0 || cfg.timesteps == 0 || cfg.image_count == 0 || cfg.planted_count == 0) {
    fail("head, timestep, image and planted counts must be >= 1");
  }
  if (std::uint64_t{cfg.planted_count} * planted_concept_count(cfg) >= cfg.head_count) {
    fail("planted_count (" + std::to_string(cfg.planted_count) + " per concept) must be < H = " +
         std::to_string(cfg.head_count));
  }
  if (cfg.token_count < 5) fail("token_count must be >= 5");
  if (cfg.concept_count < planted_concept_count(cfg) + 1) fail("need at least one distractor concept");
  if (std::uint64_t{cfg.concept_count} + cfg.token_count > cfg.d_k) {
    fail("concept_count + token_count must be <= d_k (one basis direction each, plus leak)");
  }
  if (cfg.resolution_choices.empty()) fail("no head resolutions");
  for (auto r : cfg.resolution_choices) {
    if (r == 0 || r > cfg.gt_resolution) fail("head resolutions must be in [1, gt_resolution]");
  }
  if (cfg.gt_resolution == 0 || cfg.gt_resolution > kMaxTargetResolution) fail("bad gt_resolution");
  if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise)) fail("noise must be >= 0");
  if (!(cfg.target_mass > 0.0 && cfg.target_mass < 1.0)) fail("target_mass must be in (0,1)");
  if (!(cfg.leaky_fraction >= 0.0 && cfg.leaky_fraction <= 1.0)) fail("leaky_fraction must be in [0,1]");
  if (!(cfg.coverage_min >= -1.0 && cfg.coverage_min <= cfg.coverage_max && cfg.coverage_max <= 1.0)) {
    fail("coverage range must satisfy -1 <= min <= max <= 1");
  }
  if (!std::isfinite(cfg.background_logit)) fail("background_logit must be finite");
  if (cfg.target_mass < 3.0 * background_target_mass(cfg) ||
      cfg.target_mass <= 1.0 / cfg.token_count) {
    fail("in-region target mass must be >= 3x the out-of-region mass");
  }
}

// Geometry -----------------------------------------------------------------------

/// Axis-aligned ellipse in unit-square coordinates, optionally cut by a half-plane
/// (keep points with (p - c) . n >= cut).
struct Region {
  double cx = 0.5, cy = 0.5, ax = 0.25, ay = 0.25;
  double nx = 0.0, ny = 0.0, cut = -1.0;  // n = 0 disables the cut

  bool in_ellipse(double x, double y) const {
    const double dx = (x - cx) / ax;
    const double dy = (y - cy) / ay;
    return dx * dx + dy * dy <= 1.0;
  }
  bool contains(double x, double y) const {
    return in_ellipse(x, y) && (x - cx) * nx + (y - cy) * ny >= cut;
  }
};

/// Ellipse of the given area fraction inside [x0, x1] x [0, 1].
inline Region random_ellipse(Xoshiro256& rng, double min_area, double max_area, double x0 = 0.0,
                             double x1 = 1.0) {
  const double area = rng.uniform(min_area, max_area);
  const double aspect = rng.uniform(0.6, 1.6);
  Region e;
  e.ax = std::sqrt(area / (std::numbers::pi * aspect));
  e.ay = aspect * e.ax;
  const double half_w = 0.5 * (x1 - x0);
  if (e.ax > half_w) {  // keep the area, squeeze into the strip
    e.ay *= e.ax / half_w;
    e.ax = half_w;
  }
  e.ay = std::min(e.ay, 0.5);
  e.cx = rng.uniform(x0 + e.ax, x1 - e.ax);
  e.cy = rng.uniform(e.ay, 1.0 - e.ay);
  return e;
}

/// Pixel-center rasterization at r x r.
inline std::vector<std::uint8_t> rasterize(const Region& region, std::size_t r) {
  std::vector<std::uint8_t> out(r * r, 0);
  for (std::size_t y = 0; y < r; ++y) {
    for (std::size_t x = 0; x < r; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(r);
      const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(r);
      out[y * r + x] = region.contains(px, py) ? 1 : 0;
    }
  }
  return out;
}

/// Rasterization that is never empty: falls back to the best in-ellipse pixel along the
/// cut normal, then to the pixel holding the ellipse center.
inline std::vector<std::uint8_t> rasterize_nonempty(const Region& region, std::size_t r) {
  auto out = rasterize(region, r);
  if (std::find(out.begin(), out.end(), std::uint8_t{1}) != out.end()) return out;
  double best = -INFINITY;
  std::size_t best_idx = std::min(static_cast<std::size_t>(region.cy * r), r - 1) * r +
                         std::min(static_cast<std::size_t>(region.cx * r), r - 1);
  for (std::size_t y = 0; y < r; ++y) {
    for (std::size_t x = 0; x < r; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(r);
      const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(r);
      if (!region.in_ellipse(px, py)) continue;
      const double score = (px - region.cx) * region.nx + (py - region.cy) * region.ny;
      if (score > best) {
        best = score;
        best_idx = y * r + x;
      }
    }
  }
  out[best_idx] = 1;
  return out;
}

// Model --------------------------------------------------------------------------

enum class HeadRole : std::uint8_t { kPlanted, kLeaky, kDistractor };

struct HeadSpec {
  std::uint32_t resolution = 8;
  HeadRole role = HeadRole::kDistractor;
  std::uint32_t concept_index = 0;  // planted concept, or fixed distractor concept
  std::uint32_t token_index = 0;    // distractor token (kDistractor only)
  Matrix basis;                     // d_k x d_k, orthonormal rows
};

struct FixtureTruth {
  std::vector<std::string> concept_names;
  std::vector<HeadSet> planted;  // one set per planted concept, concept index = position
  std::vector<std::string> image_ids;
  std::vector<std::size_t> target_token_indices;
  std::uint32_t head_count = 0;
};

struct FixtureImage {
  RunManifest manifest;
  atnd::Dump dump;                      // raw Q/K (content kind 1)
  std::vector<BinaryMask> gt_masks;     // one per planted concept
  RgbImage image;
};

inline const std::vector<std::string>& default_concepts() {
  static const std::vector<std::string> names = {"animals", "electronics", "vehicles", "food",
                                                 "furniture", "plants", "buildings", "clothing"};
  return names;
}

inline const std::vector<std::string>& benchmark_animals() {
  static const std::vector<std::string> animals = {"bear",  "bird",     "cat",   "cow",    "dog",
                                                   "elephant", "sheep", "horse", "monkey", "zebra"};
  return animals;
}

class FixtureGenerator {
 public:
  explicit FixtureGenerator(FixtureConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    build_model();
  }

  const FixtureConfig& config() const noexcept { return cfg_; }
  const FixtureTruth& truth() const noexcept { return truth_; }
  const std::vector<HeadSpec>& heads() const noexcept { return heads_; }
  std::size_t target_token_index() const noexcept { return cfg_.ambiguous ? 2 : 4; }

  std::vector<std::string> tokens(std::size_t image) const {
    std::vector<std::string> base;
    if (cfg_.ambiguous) {
      base = {"<|startoftext|>", "a", "mouse", "and", "other", "office", "objects", "are", "on",
              "the", "desk"};
    } else {
      base = {"<|startoftext|>", "photo", "of", "a", animal(image)};
    }
    base.resize(std::max<std::size_t>(base.size(), cfg_.token_count), "<|endoftext|>");
    base.resize(cfg_.token_count);
    if (base.size() > 5 && !cfg_.ambiguous) base[5] = "<|endoftext|>";
    return base;
  }

  std::string prompt(std::size_t image) const {
    return cfg_.ambiguous ? "a mouse and other office objects are on the desk"
                          : "photo of a " + animal(image);
  }

  static std::string image_id(std::size_t image) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%03zu", image);
    return buf;
  }

  /// Concept keys K~ (content kind 2) for every head, labelled with concept names.
  atnd::Dump concept_key_dump() const {
    atnd::Dump dump;
    dump.kind = atnd::ContentKind::kConceptKeys;
    dump.timesteps = 1;
    dump.token_count = cfg_.concept_count;
    dump.d_k = cfg_.d_k;
    dump.labels = truth_.concept_names;
    for (const HeadSpec& head : heads_) {
      atnd::Head h;
      h.resolution = 1;
      for (std::uint32_t c = 0; c < cfg_.concept_count; ++c) append_key(h.keys, head, {c}, 1.0);
      dump.heads.push_back(std::move(h));
    }
    return dump;
  }

  FixtureImage image(std::size_t index) const;

 private:
  std::string animal(std::size_t image) const {
    return benchmark_animals()[image % benchmark_animals().size()];
  }

  // Basis row indices.
  std::uint32_t concept_dir(std::uint32_t c) const { return c; }
  std::uint32_t leak_dir() const { return cfg_.concept_count + cfg_.token_count - 1; }
  std::uint32_t token_dir(std::uint32_t token) const {
    // non-target tokens in order, after the concept directions
    const auto target = static_cast<std::uint32_t>(target_token_index());
    return cfg_.concept_count + (token < target ? token : token - 1);
  }

  std::vector<std::uint32_t> target_token_dirs() const {
    std::vector<std::uint32_t> dirs;
    for (std::uint32_t c = 0; c < planted_concept_count(cfg_); ++c) dirs.push_back(concept_dir(c));
    dirs.push_back(leak_dir());
    return dirs;
  }

  // Appends sqrt(d_k) * normalize(sum of basis rows) as one key row.
  void append_key(std::vector<float>& out, const HeadSpec& head, const std::vector<std::uint32_t>& dirs,
                  double) const {
    const double scale = std::sqrt(static_cast<double>(cfg_.d_k)) / std::sqrt(static_cast<double>(dirs.size()));
    for (std::uint32_t c = 0; c < cfg_.d_k; ++c) {
      double v = 0.0;
      for (auto d : dirs) v += head.basis(d, c);
      out.push_back(static_cast<float>(scale * v));
    }
  }

  std::vector<float> token_keys(const HeadSpec& head) const {
    std::vector<float> keys;
    const auto target = static_cast<std::uint32_t>(target_token_index());
    for (std::uint32_t s = 0; s < cfg_.token_count; ++s) {
      if (s == target) {
        append_key(keys, head, target_token_dirs(), 1.0);
      } else {
        append_key(keys, head, {token_dir(s)}, 1.0);
      }
    }
    return keys;
  }

  void build_model();

  FixtureConfig cfg_;
  std::vector<HeadSpec> heads_;
  FixtureTruth truth_;
};

inline void FixtureGenerator::build_model() {
  Xoshiro256 rng(derive_seed(cfg_.seed, 0));
  const std::uint32_t h_count = cfg_.head_count;
  const std::uint32_t n_planted_concepts = planted_concept_count(cfg_);

  truth_.head_count = h_count;
  for (std::uint32_t c = 0; c < cfg_.concept_count; ++c) {
    truth_.concept_names.push_back(c < default_concepts().size() ? default_concepts()[c]
                                                                 : "concept_" + std::to_string(c));
  }

  heads_.resize(h_count);
  for (auto& head : heads_) {
    head.resolution = cfg_.resolution_choices[rng.below(cfg_.resolution_choices.size())];
  }

  // Planted heads: a partial Fisher-Yates shuffle picks the ids.
  std::vector<std::uint32_t> order(h_count);
  std::iota(order.begin(), order.end(), 0u);
  const std::uint32_t picked = cfg_.planted_count * n_planted_concepts;
  for (std::uint32_t i = 0; i < picked; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.below(h_count - i));
    std::swap(order[i], order[j]);
  }
  for (std::uint32_t c = 0; c < n_planted_concepts; ++c) {
    std::vector<std::uint32_t> ids(order.begin() + c * cfg_.planted_count,
                                   order.begin() + (c + 1) * cfg_.planted_count);
    for (auto id : ids) {
      heads_[id].role = HeadRole::kPlanted;
      heads_[id].concept_index = c;
    }
    truth_.planted.emplace_back(std::move(ids), h_count);
  }

  const auto target = static_cast<std::uint32_t>(target_token_index());
  for (auto& head : heads_) {
    // Draw role parameters for every head so the stream layout does not depend on roles.
    const bool leaky = rng.uniform() < cfg_.leaky_fraction;
    const auto distractor_concept =
        n_planted_concepts + static_cast<std::uint32_t>(rng.below(cfg_.concept_count - n_planted_concepts));
    auto token = 1 + static_cast<std::uint32_t>(rng.below(cfg_.token_count - 2));
    if (token >= target) ++token;
    if (head.role != HeadRole::kPlanted) {
      head.role = leaky ? HeadRole::kLeaky : HeadRole::kDistractor;
      head.concept_index = distractor_concept;
      head.token_index = token;
    }
  }

  // Orthonormal basis per head: Gram-Schmidt on Gaussian vectors.
  for (auto& head : heads_) {
    const std::size_t d = cfg_.d_k;
    head.basis = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (;;) {
        for (std::size_t c = 0; c < d; ++c) head.basis(i, c) = rng.normal();
        for (std::size_t j = 0; j < i; ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) dot += head.basis(i, c) * head.basis(j, c);
          for (std::size_t c = 0; c < d; ++c) head.basis(i, c) -= dot * head.basis(j, c);
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) norm += head.basis(i, c) * head.basis(i, c);
        norm = std::sqrt(norm);
        if (norm > 1e-6) {
          for (std::size_t c = 0; c < d; ++c) head.basis(i, c) /= norm;
          break;
        }
      }
    }
  }

  for (std::uint32_t i = 0; i < cfg_.image_count; ++i) {
    truth_.image_ids.push_back(image_id(i));
    truth_.target_token_indices.push_back(target);
  }
}

inline FixtureImage FixtureGenerator::image(std::size_t index) const {
  if (index >= cfg_.image_count) throw ValidationError("fixture image index out of range");
  Xoshiro256 rng(derive_seed(cfg_.seed, index + 1));
  const std::uint32_t n_planted_concepts = planted_concept_count(cfg_);
  const double target_logit = calibrated_target_logit(cfg_);
  const double concept_coef = target_logit * std::sqrt(static_cast<double>(n_planted_concepts + 1));

  // Ground-truth regions, one per planted concept (disjoint strips when ambiguous).
  std::vector<Region> gt_regions;
  for (std::uint32_t c = 0; c < n_planted_concepts; ++c) {
    if (cfg_.ambiguous) {
      gt_regions.push_back(random_ellipse(rng, 0.08, 0.2, c == 0 ? 0.0 : 0.5, c == 0 ? 0.5 : 1.0));
    } else {
      gt_regions.push_back(random_ellipse(rng, 0.1, 0.4));
    }
  }

  // Active region of every head for this image.
  struct Active {
    Region region;
    std::uint32_t concept_index;
  };
  std::vector<Active> active(heads_.size());
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const HeadSpec& head = heads_[h];
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double cut_frac = rng.uniform(cfg_.coverage_min, cfg_.coverage_max);
    const Region wrong = random_ellipse(rng, 0.05, 0.25);
    const auto leaky_concept = static_cast<std::uint32_t>(rng.below(cfg_.concept_count));
    const double halo_scale = rng.uniform(1.3, 1.8);
    const double halo_dx = rng.uniform(-0.1, 0.1);
    const double halo_dy = rng.uniform(-0.1, 0.1);
    if (head.role == HeadRole::kPlanted) {
      Region part = gt_regions[head.concept_index];
      part.nx = std::cos(theta);
      part.ny = std::sin(theta);
      const double extent = std::hypot(part.ax * part.nx, part.ay * part.ny);
      part.cut = cut_frac * extent;
      active[h] = {part, head.concept_index};
    } else if (head.role == HeadRole::kLeaky) {
      Region halo = gt_regions[0];
      halo.cx += halo_dx;
      halo.cy += halo_dy;
      halo.ax *= halo_scale;
      halo.ay *= halo_scale;
      active[h] = {halo, leaky_concept};
    } else {
      active[h] = {wrong, head.concept_index};
    }
  }

  FixtureImage out;
  atnd::Dump& dump = out.dump;
  dump.kind = atnd::ContentKind::kQueryKey;
  dump.timesteps = cfg_.timesteps;
  dump.token_count = cfg_.token_count;
  dump.d_k = cfg_.d_k;
  dump.labels = tokens(index);
  dump.heads.resize(heads_.size());

  const std::size_t d = cfg_.d_k;
  std::vector<double> inside(d);
  std::vector<double> outside(d);
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const HeadSpec& head = heads_[h];
    const Active& act = active[h];
    const std::size_t r = head.resolution;

    // Structured query inside the active region; sink-token query elsewhere.
    std::fill(inside.begin(), inside.end(), 0.0);
    auto add_dir = [&](std::uint32_t dir, double coef) {
      for (std::size_t c = 0; c < d; ++c) inside[c] += coef * head.basis(dir, c);
    };
    add_dir(concept_dir(act.concept_index), concept_coef);
    if (head.role == HeadRole::kLeaky) {
      add_dir(leak_dir(), concept_coef);
    } else if (head.role == HeadRole::kDistractor) {
      add_dir(token_dir(head.token_index), target_logit);
    }
    for (std::size_t c = 0; c < d; ++c) outside[c] = cfg_.background_logit * head.basis(token_dir(0), c);

    const auto mask = rasterize_nonempty(act.region, r);
    atnd::Head& dst = dump.heads[h];
    dst.resolution = head.resolution;
    dst.keys = token_keys(head);
    dst.data.resize(std::size_t{cfg_.timesteps} * r * r * d);
    float* q = dst.data.data();
    for (std::uint32_t t = 0; t < cfg_.timesteps; ++t) {
      for (std::size_t p = 0; p < r * r; ++p) {
        const auto& base = mask[p] ? inside : outside;
        for (std::size_t c = 0; c < d; ++c) {
          double v = base[c];
          if (cfg_.noise > 0.0) v += cfg_.noise * rng.normal();
          *q++ = static_cast<float>(v);
        }
      }
    }
  }

  // Ground truth masks and the rendered base image.
  const std::size_t g = cfg_.gt_resolution;
  for (const Region& region : gt_regions) out.gt_masks.emplace_back(g, g, rasterize(region, g));
  out.image.width = g;
  out.image.height = g;
  out.image.pixels.resize(g * g * 3);
  static constexpr std::uint8_t kObjectColors[2][3] = {{150, 100, 60}, {60, 60, 70}};
  for (std::size_t y = 0; y < g; ++y) {
    for (std::size_t x = 0; x < g; ++x) {
      std::uint8_t* px = out.image.pixels.data() + 3 * (y * g + x);
      const auto shade = static_cast<std::uint8_t>(170 + (60 * y) / g);
      px[0] = shade;
      px[1] = shade;
      px[2] = static_cast<std::uint8_t>(std::min<std::size_t>(255, shade + 20));
      for (std::size_t c = 0; c < out.gt_masks.size(); ++c) {
        if (out.gt_masks[c](x, y)) std::copy(kObjectColors[c], kObjectColors[c] + 3, px);
      }
    }
  }

  RunManifest& m = out.manifest;
  m.image_id = image_id(index);
  m.prompt = prompt(index);
  m.token_strings = dump.labels;
  m.target_token_indices = {target_token_index()};
  m.seed = derive_seed(cfg_.seed, index + 1);
  m.model_id = "synthetic-fixture";
  m.timesteps = cfg_.timesteps;
  for (const auto& name : truth_.concept_names) {
    m.sampled_concept_words[name] = name + "_word_" + std::to_string(rng.below(10));
  }
  return out;
}

// Files --------------------------------------------------------------------------

inline nlohmann::ordered_json truth_to_json(const FixtureTruth& truth, const FixtureConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["seed"] = cfg.seed;
  doc["head_count"] = truth.head_count;
  doc["noise"] = cfg.noise;
  for (std::size_t c = 0; c < truth.planted.size(); ++c) {
    doc["planted"][truth.concept_names[c]] = truth.planted[c].ids();
  }
  doc["images"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < truth.image_ids.size(); ++i) {
    doc["images"].push_back({{"image_id", truth.image_ids[i]},
                             {"target_token_index", truth.target_token_indices[i]}});
  }
  return doc;
}

inline FixtureTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  FixtureTruth truth;
  try {
    const auto doc = nlohmann::ordered_json::parse(in);
    truth.head_count = doc.at("head_count").get<std::uint32_t>();
    for (const auto& [name, ids] : doc.at("planted").items()) {
      truth.concept_names.push_back(name);
      truth.planted.emplace_back(ids.get<std::vector<std::uint32_t>>(), truth.head_count);
    }
    for (const auto& img : doc.at("images")) {
      truth.image_ids.push_back(img.at("image_id").get<std::string>());
      truth.target_token_indices.push_back(img.at("target_token_index").get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return truth;
}

/// Fraction of the planted heads of concept `concept_index` found among its top-|planted|
/// HRV heads.
inline double planted_recovery(const FixtureTruth& truth, const HeadRelevanceVector& hrv,
                               std::size_t concept_index) {
  const HeadSet& planted = truth.planted.at(concept_index);
  if (hrv.head_count() != truth.head_count) {
    throw ValidationError("HRV has " + std::to_string(hrv.head_count()) + " heads, fixture has " +
                          std::to_string(truth.head_count));
  }
  const HeadSet top = top_k_heads(hrv, planted.size());
  std::size_t hits = 0;
  for (auto id : top.ids()) hits += planted.contains(id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(planted.size());
}

struct FixtureLayout {
  std::filesystem::path root;
  std::filesystem::path dumps() const { return root / "dumps"; }
  std::filesystem::path masks() const { return root / "masks"; }
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path manifests() const { return root / "manifests"; }
  std::filesystem::path concept_keys() const { return root / "concept_keys.atnd"; }
  std::filesystem::path truth() const { return root / "truth.json"; }
};

}  // namespace headlens::synth
