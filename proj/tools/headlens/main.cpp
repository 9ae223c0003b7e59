// headlens: synthetic benchmarks, head relevance vectors, selective aggregation,
// segmentation scoring and overlays.
//
//   headlens synth     --out DIR [--images N --heads H --planted P ...]
//   headlens hrv       --dumps DIR --concept-keys FILE --out hrv.json
//   headlens aggregate --dump FILE|DIR --mode all|top-k|bottom-k|explicit --out FILE|DIR
//   headlens evaluate  --method NAME=PATH ... --manifest FILE|DIR [--csv F --summary F]
//   headlens render    --image PNG --agg FILE (--token WORD | --token-index I | --manifest F) --out PNG
//
// Exit codes: 0 ok, 2 format/IO/validation, 3 empty input, 4 configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "headlens/fixture_io.hpp"
#include "headlens/headlens.hpp"
#include "headlens/overlay.hpp"
#include "layering.hpp"

namespace fs = std::filesystem;
using namespace headlens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitConfig = 4;

struct Options {
  std::string config;
  std::uint64_t seed = synth::kDefaultSeed;
  std::size_t jobs = 1;

  // synth
  std::string synth_out;
  std::uint32_t images = 20;
  std::uint32_t heads = 128;
  std::uint32_t planted = 30;
  std::uint32_t timesteps = 5;
  double noise = 0.1;
  double leaky_fraction = synth::FixtureConfig{}.leaky_fraction;
  bool ambiguous = false;

  // hrv
  std::string dumps_dir;
  std::string concept_keys;
  std::string hrv_out;

  // aggregate
  std::string dump;
  std::string mode = "all";
  std::string hrv;
  std::string concept_name;
  std::size_t k = 30;
  std::vector<std::uint32_t> head_ids;
  std::size_t target_r = kDefaultTargetResolution;
  std::string agg_out;

  // evaluate
  std::vector<std::string> methods;
  std::string manifest;
  std::string gt;
  std::vector<double> thresholds = kDefaultThresholds;
  std::string csv;
  std::string summary;

  // render
  std::string image;
  std::string agg;
  std::string token;
  std::vector<std::size_t> token_indices;
  std::string render_out;
};

void build_app(CLI::App& app, Options& o) {
  app.set_version_flag("--version", std::string("headlens ") + kVersionString + " (ATND format " +
                                        std::to_string(atnd::kVersion) + ")");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config, "TOML file with option defaults ([<subcommand>] tables allowed)");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--jobs", o.jobs, "Images processed in parallel")->check(CLI::PositiveNumber);

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic benchmark with planted heads");
  synth_cmd->add_option("--out", o.synth_out, "Output directory");
  synth_cmd->add_option("--images", o.images, "Number of images");
  synth_cmd->add_option("--heads", o.heads, "Number of cross-attention heads H");
  synth_cmd->add_option("--planted", o.planted, "Planted heads per concept");
  synth_cmd->add_option("--timesteps", o.timesteps, "Denoising timesteps T");
  synth_cmd->add_option("--noise", o.noise, "Query noise standard deviation");
  synth_cmd->add_option("--leaky-fraction", o.leaky_fraction, "Share of non-planted heads that leak");
  synth_cmd->add_flag("--ambiguous", o.ambiguous, "Plant two concepts in disjoint regions");

  auto* hrv_cmd = app.add_subcommand("hrv", "Build head relevance vectors from raw Q/K dumps");
  hrv_cmd->add_option("--dumps", o.dumps_dir, "Directory of *.atnd raw Q/K dumps");
  hrv_cmd->add_option("--concept-keys", o.concept_keys, "Concept key dump (content kind 2)");
  hrv_cmd->add_option("--out", o.hrv_out, "Output HRV JSON");
  hrv_cmd->add_option("-k,--k", o.k, "Heads shown in the preview")->check(CLI::PositiveNumber);

  auto* agg_cmd = app.add_subcommand("aggregate", "Aggregate per-head maps into token heatmaps");
  agg_cmd->add_option("--dump", o.dump, "Dump file, or directory of dumps");
  agg_cmd->add_option("--mode", o.mode, "all | top-k | bottom-k | explicit")
      ->check(CLI::IsMember({"all", "top-k", "bottom-k", "explicit"}));
  agg_cmd->add_option("--hrv", o.hrv, "HRV JSON (top-k / bottom-k)");
  agg_cmd->add_option("--concept", o.concept_name, "Concept to rank heads by");
  agg_cmd->add_option("-k,--k", o.k, "Number of heads")->check(CLI::PositiveNumber);
  agg_cmd->add_option("--heads", o.head_ids, "Head ids for explicit mode")->delimiter(',');
  agg_cmd->add_option("--target-r", o.target_r, "Output resolution")
      ->check(CLI::Range(std::size_t{1}, kMaxTargetResolution));
  agg_cmd->add_option("--out", o.agg_out, "Output file, or directory when --dump is one");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score aggregates against ground-truth masks");
  eval_cmd->add_option("--method", o.methods, "NAME=PATH; PATH is an aggregate or a directory of <image_id>.atnd");
  eval_cmd->add_option("--manifest", o.manifest, "Manifest file, or directory of manifests");
  eval_cmd->add_option("--gt", o.gt, "Ground-truth mask overriding the manifest's (single manifest only)");
  eval_cmd->add_option("--thresholds", o.thresholds, "Binarization thresholds")->delimiter(',');
  eval_cmd->add_option("--csv", o.csv, "Per-image CSV output");
  eval_cmd->add_option("--summary", o.summary, "Summary JSON output (stdout if omitted)");

  auto* render_cmd = app.add_subcommand("render", "Overlay a token heatmap on an image");
  render_cmd->add_option("--image", o.image, "Base PNG");
  render_cmd->add_option("--agg", o.agg, "Aggregate dump");
  render_cmd->add_option("--token", o.token, "Token string to look up in the aggregate labels");
  render_cmd->add_option("--token-index", o.token_indices, "Token indices")->delimiter(',');
  render_cmd->add_option("--manifest", o.manifest, "Manifest supplying the target tokens");
  render_cmd->add_option("--out", o.render_out, "Output PNG");
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_synth(const Options& o) {
  require(o.synth_out, "--out");
  synth::FixtureConfig cfg;
  cfg.image_count = o.images;
  cfg.head_count = o.heads;
  cfg.planted_count = o.planted;
  cfg.timesteps = o.timesteps;
  cfg.noise = o.noise;
  cfg.leaky_fraction = o.leaky_fraction;
  cfg.ambiguous = o.ambiguous;
  cfg.seed = o.seed;
  const synth::FixtureGenerator gen(cfg);
  synth::write_fixture(gen, o.synth_out, o.jobs);
  std::printf("wrote %u images, H=%u, planted=%u per concept, to %s\n", cfg.image_count, cfg.head_count,
              cfg.planted_count, o.synth_out.c_str());
  return kExitOk;
}

int cmd_hrv(const Options& o) {
  require(o.dumps_dir, "--dumps");
  require(o.concept_keys, "--concept-keys");
  require(o.hrv_out, "--out");
  const auto files = files_with_extension(o.dumps_dir, ".atnd");
  if (files.empty()) throw EmptyInputError("no .atnd dumps in " + o.dumps_dir);
  const atnd::Dump keys = atnd::read(o.concept_keys);
  atnd::require_kind(keys, atnd::ContentKind::kConceptKeys, o.concept_keys.c_str());
  const auto names = atnd::concept_names(keys);

  auto partial = parallel_map(files.size(), o.jobs, [&](std::size_t i) {
    VoteAccumulator acc(names, keys.head_count());
    const atnd::Dump dump = atnd::read(files[i]);
    try {
      accumulate_hrv_votes(dump, keys, acc);
    } catch (const Error& e) {
      throw FormatError(files[i].string() + ": " + e.what());
    }
    return acc;
  });
  VoteAccumulator total(names, keys.head_count());
  for (const auto& acc : partial) total.merge(acc);
  const auto hrvs = finalize_hrv(total);
  write_hrv_json(hrvs, o.hrv_out);

  const std::size_t k = std::min<std::size_t>(o.k, keys.head_count());
  for (const auto& v : hrvs) {
    if (v.degenerate) {
      std::printf("%s: no votes\n", v.concept_name.c_str());
      continue;
    }
    std::printf("%s: top-%zu", v.concept_name.c_str(), k);
    const HeadSet top = top_k_heads(v, k);
    for (auto id : top.ids()) std::printf(" %u", id);
    std::printf("\n");
  }
  return kExitOk;
}

HeadSet select_heads(const Options& o, std::uint32_t head_count) {
  if (o.mode == "all") return HeadSet::all(head_count);
  if (o.mode == "explicit") {
    if (o.head_ids.empty()) throw ConfigError("--mode explicit needs --heads");
    return HeadSet(o.head_ids, head_count);
  }
  require(o.hrv, "--hrv");
  require(o.concept_name, "--concept");
  const auto hrvs = read_hrv_json(o.hrv);
  const HeadRelevanceVector& v = find_concept(hrvs, o.concept_name);
  if (v.head_count() != head_count) {
    throw ShapeError("HRV has " + std::to_string(v.head_count()) + " heads, dump has " +
                     std::to_string(head_count));
  }
  if (o.k > head_count) {
    throw ConfigError("k = " + std::to_string(o.k) + " exceeds H = " + std::to_string(head_count));
  }
  return o.mode == "top-k" ? top_k_heads(v, o.k) : bottom_k_heads(v, o.k);
}

void aggregate_file(const Options& o, const fs::path& in, const fs::path& out) {
  const atnd::Dump dump = atnd::read(in);
  const HeadSet heads = select_heads(o, dump.head_count());
  const auto maps = time_averaged_head_maps(dump);
  const AggregatedMap agg = o.mode == "all" ? aggregate_daam(maps, dump.head_count(), o.target_r)
                                            : aggregate_selective(maps, heads, o.target_r);
  atnd::write(to_dump(agg, dump.labels), out);
}

int cmd_aggregate(const Options& o) {
  require(o.dump, "--dump");
  require(o.agg_out, "--out");
  if (!fs::is_directory(o.dump)) {
    aggregate_file(o, o.dump, o.agg_out);
    std::printf("wrote %s\n", o.agg_out.c_str());
    return kExitOk;
  }
  const auto files = files_with_extension(o.dump, ".atnd");
  if (files.empty()) throw EmptyInputError("no .atnd dumps in " + o.dump);
  // Resolve head selection errors (unknown concept, bad k) once, before any work.
  if (o.mode != "all") (void)select_heads(o, atnd::read(files.front()).head_count());
  std::error_code ec;
  fs::create_directories(o.agg_out, ec);
  if (ec) throw IoError("cannot create " + o.agg_out + ": " + ec.message());
  parallel_map(files.size(), o.jobs, [&](std::size_t i) {
    aggregate_file(o, files[i], fs::path(o.agg_out) / files[i].filename());
    return 0;
  });
  std::printf("wrote %zu aggregates to %s\n", files.size(), o.agg_out.c_str());
  return kExitOk;
}

struct MethodArg {
  std::string name;
  fs::path path;
};

std::vector<MethodArg> parse_methods(const std::vector<std::string>& args) {
  if (args.empty()) throw ConfigError("--method NAME=PATH is required");
  std::vector<MethodArg> out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
      throw ConfigError("--method expects NAME=PATH, got '" + a + "'");
    }
    out.push_back({a.substr(0, eq), a.substr(eq + 1)});
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (out[i].name == out.back().name) throw ConfigError("duplicate method name " + out.back().name);
    }
  }
  return out;
}

int cmd_evaluate(const Options& o) {
  require(o.manifest, "--manifest");
  const auto methods = parse_methods(o.methods);
  for (double v : o.thresholds) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("threshold " + std::to_string(v) + " outside (0,1)");
  }
  if (o.thresholds.empty()) throw ConfigError("no thresholds");

  std::vector<fs::path> manifests;
  if (fs::is_directory(o.manifest)) {
    manifests = files_with_extension(o.manifest, ".json");
    if (manifests.empty()) throw EmptyInputError("no manifests in " + o.manifest);
  } else {
    manifests.push_back(o.manifest);
  }
  if (!o.gt.empty() && manifests.size() != 1) throw ConfigError("--gt needs a single --manifest file");

  auto per_image = parallel_map(manifests.size(), o.jobs, [&](std::size_t i) {
    const RunManifest m = read_manifest(manifests[i]);
    const fs::path gt_path = !o.gt.empty() ? fs::path(o.gt) : manifest_relative(manifests[i], m.gt_mask_path);
    if (gt_path.empty()) throw IoError(manifests[i].string() + ": no ground-truth mask");
    const BinaryMask gt = read_mask(gt_path);
    std::vector<AggregatedMap> aggs;
    for (const auto& method : methods) {
      const fs::path p = fs::is_directory(method.path) ? method.path / (m.image_id + ".atnd") : method.path;
      aggs.push_back(aggregated_from_dump(atnd::read(p)));
    }
    std::vector<NamedAggregate> named;
    for (std::size_t j = 0; j < methods.size(); ++j) named.push_back({methods[j].name, &aggs[j]});
    return evaluate_image(m.image_id, named, m.token_info(), gt, o.thresholds);
  });

  std::vector<EvalRecord> records;
  for (auto& r : per_image) records.insert(records.end(), r.begin(), r.end());
  std::stable_sort(records.begin(), records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.image_id < b.image_id; });

  if (!o.csv.empty()) {
    std::ofstream out(o.csv, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + o.csv);
    out << records_to_csv(records);
  }
  std::vector<std::string> names;
  for (const auto& m : methods) names.push_back(m.name);
  const std::string summary = summarize(records, names, o.thresholds).dump(2) + "\n";
  if (o.summary.empty()) {
    std::fputs(summary.c_str(), stdout);
  } else {
    std::ofstream out(o.summary, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + o.summary);
    out << summary;
  }
  return kExitOk;
}

int cmd_render(const Options& o) {
  require(o.image, "--image");
  require(o.agg, "--agg");
  require(o.render_out, "--out");
  const atnd::Dump dump = atnd::read(o.agg);
  const AggregatedMap agg = aggregated_from_dump(dump);
  std::vector<std::string> labels = dump.labels;
  if (labels.empty()) {
    for (std::size_t s = 0; s < agg.token_count(); ++s) labels.push_back("token_" + std::to_string(s));
  }

  std::vector<std::size_t> indices = o.token_indices;
  if (!o.token.empty()) {
    const auto it = std::find(labels.begin(), labels.end(), o.token);
    if (it == labels.end()) throw ConfigError("token '" + o.token + "' not in aggregate labels");
    indices = {static_cast<std::size_t>(it - labels.begin())};
  } else if (indices.empty() && !o.manifest.empty()) {
    indices = read_manifest(o.manifest).target_token_indices;
  }
  if (indices.empty()) throw ConfigError("render needs --token, --token-index or --manifest");
  for (auto i : indices) {
    if (i >= labels.size()) throw ConfigError("token index " + std::to_string(i) + " out of range");
  }

  render_overlay(o.image, extract_token_heatmap(agg, TokenInfo(labels, indices)), o.render_out);
  std::printf("wrote %s\n", o.render_out.c_str());
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyInput: return kExitEmpty;
    case ErrorKind::kConfig: return kExitConfig;
    default: return kExitData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  // CLI11 consumes the vector from the back.
  auto reversed = [](std::vector<std::string> v) {
    std::reverse(v.begin(), v.end());
    return v;
  };

  Options first_opts;
  CLI::App first("headlens");
  build_app(first, first_opts);
  try {
    first.parse(reversed(args));
  } catch (const CLI::ParseError& e) {
    const int code = first.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::vector<CLI::ConfigItem> config;
  if (auto path = cli::find_config_arg(args)) {
    try {
      config = CLI::ConfigTOML().from_file(*path);
    } catch (const CLI::ParseError& e) {
      throw ConfigError("cannot read config " + *path + ": " + e.what());
    }
  }
  const auto extra = cli::layered_args(first, config);

  Options o;
  CLI::App app("headlens");
  build_app(app, o);
  std::vector<std::string> all = args;
  all.insert(all.end(), extra.begin(), extra.end());
  try {
    app.parse(reversed(all));
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "headlens: bad environment or config value: %s\n", e.what());
    return kExitConfig;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  if (sub == "synth") return cmd_synth(o);
  if (sub == "hrv") return cmd_hrv(o);
  if (sub == "aggregate") return cmd_aggregate(o);
  if (sub == "evaluate") return cmd_evaluate(o);
  return cmd_render(o);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "headlens: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "headlens: %s\n", e.what());
    return kExitData;
  }
}
