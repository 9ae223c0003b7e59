#pragma once

// Per-image run manifest (JSON, schema_version 1).
//
// {
//   "schema_version": 1,
//   "image_id": "img_000",
//   "prompt": "photo of a dog",
//   "token_strings": ["<|startoftext|>", "photo", ...],
//   "target_token_indices": [4],
//   "seed": 1234,
//   "model_id": "synthetic-fixture",
//   "timesteps": 5,
//   "sampled_concept_words": {"animals": "dog", ...},
//   "files": {"dump": "...", "gt_mask": "...", "image": "..."}
// }
//
// File paths are relative to the manifest's directory unless absolute.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "headlens/attention.hpp"
#include "headlens/error.hpp"

namespace headlens {

inline constexpr int kManifestSchemaVersion = 1;

struct RunManifest {
  std::string image_id;
  std::string prompt;
  std::vector<std::string> token_strings;
  std::vector<std::size_t> target_token_indices;
  std::uint64_t seed = 0;
  std::string model_id;
  std::uint32_t timesteps = 0;
  std::map<std::string, std::string> sampled_concept_words;
  std::string dump_path;
  std::string gt_mask_path;
  std::string image_path;

  TokenInfo token_info() const { return TokenInfo(token_strings, target_token_indices); }
};

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kManifestSchemaVersion;
  doc["image_id"] = m.image_id;
  doc["prompt"] = m.prompt;
  doc["token_strings"] = m.token_strings;
  doc["target_token_indices"] = m.target_token_indices;
  doc["seed"] = m.seed;
  doc["model_id"] = m.model_id;
  doc["timesteps"] = m.timesteps;
  doc["sampled_concept_words"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.sampled_concept_words) doc["sampled_concept_words"][k] = v;
  doc["files"]["dump"] = m.dump_path;
  doc["files"]["gt_mask"] = m.gt_mask_path;
  doc["files"]["image"] = m.image_path;
  return doc;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

/// Resolves a manifest-relative path.
inline std::filesystem::path manifest_relative(const std::filesystem::path& manifest_path,
                                               const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

/// Parses and validates a manifest; referenced non-empty paths must exist.
inline RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  RunManifest m;
  try {
    const auto doc = nlohmann::json::parse(in);
    const int version = doc.at("schema_version").get<int>();
    if (version != kManifestSchemaVersion) {
      throw FormatError(path.string() + ": unsupported schema_version " + std::to_string(version));
    }
    m.image_id = doc.at("image_id").get<std::string>();
    m.prompt = doc.value("prompt", "");
    m.token_strings = doc.at("token_strings").get<std::vector<std::string>>();
    m.target_token_indices = doc.at("target_token_indices").get<std::vector<std::size_t>>();
    m.seed = doc.value("seed", std::uint64_t{0});
    m.model_id = doc.value("model_id", "");
    m.timesteps = doc.value("timesteps", std::uint32_t{0});
    if (doc.contains("sampled_concept_words")) {
      m.sampled_concept_words =
          doc.at("sampled_concept_words").get<std::map<std::string, std::string>>();
    }
    if (doc.contains("files")) {
      const auto& files = doc.at("files");
      m.dump_path = files.value("dump", "");
      m.gt_mask_path = files.value("gt_mask", "");
      m.image_path = files.value("image", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    (void)m.token_info();
  } catch (const ValidationError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (const std::string* file : {&m.dump_path, &m.gt_mask_path, &m.image_path}) {
    if (!file->empty() && !std::filesystem::exists(manifest_relative(path, *file))) {
      throw IoError(path.string() + ": referenced file " + *file + " does not exist");
    }
  }
  return m;
}

}  // namespace headlens
