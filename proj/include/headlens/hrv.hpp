#pragma once

// Head relevance vectors: per-head concept attention, argmax voting, L1 normalization,
// and top/bottom-k head selection.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "headlens/aggregation.hpp"
#include "headlens/attention.hpp"
#include "headlens/error.hpp"
#include "headlens/matrix.hpp"

namespace headlens {

/// Key-projected concept-word embeddings of one head: N rows by d_k.
class ConceptKeySet {
 public:
  ConceptKeySet(std::uint32_t head_id, Matrix values, std::vector<std::string> concept_names)
      : head_id_(head_id), values_(std::move(values)), names_(std::move(concept_names)) {
    if (values_.rows() == 0) throw ValidationError("concept key set needs at least one concept");
    if (values_.cols() == 0) throw ValidationError("concept key d_k must be >= 1");
    if (names_.size() != values_.rows()) {
      throw ShapeError("concept key set has " + std::to_string(values_.rows()) + " rows but " +
                       std::to_string(names_.size()) + " names");
    }
    if (!values_.all_finite()) throw ValidationError("concept keys contain NaN/Inf");
  }

  std::uint32_t head_id() const noexcept { return head_id_; }
  std::size_t concept_count() const noexcept { return values_.rows(); }
  std::size_t d_k() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& concept_names() const noexcept { return names_; }

 private:
  std::uint32_t head_id_;
  Matrix values_;
  std::vector<std::string> names_;
};

/// Spatially averaged concept attention of one head.
struct RelevanceScore {
  std::uint32_t head_id = 0;
  std::vector<double> scores;
};

/// Concept attention map (r_h^2 x N) of one head; same kernel as the token attention.
inline AttentionMap hrv_attention(const QueryMatrix& q, const ConceptKeySet& ck) {
  if (q.head_id() != ck.head_id()) {
    throw ShapeError("query head " + std::to_string(q.head_id()) + " paired with concept keys of head " +
                     std::to_string(ck.head_id()));
  }
  if (q.d_k() != ck.d_k()) {
    throw ShapeError("d_k mismatch: query (head " + std::to_string(q.head_id()) + ") has " +
                     std::to_string(q.d_k()) + ", concept keys have " + std::to_string(ck.d_k()));
  }
  return AttentionMap(q.head_id(), q.timestep(), q.resolution(),
                      softmax_rows(scaled_logits(q.values(), ck.values())));
}

inline RelevanceScore spatial_mean(const AttentionMap& m) {
  const Matrix& v = m.values();
  RelevanceScore out{m.head_id(), std::vector<double>(v.cols(), 0.0)};
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const auto row = v.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out.scores[c] += row[c];
  }
  const double n = static_cast<double>(v.rows());
  for (double& s : out.scores) s /= n;
  return out;
}

/// Index of the largest score; ties go to the lowest index.
inline std::size_t argmax_concept(const std::vector<double>& scores) {
  if (scores.empty()) throw ValidationError("empty relevance score");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

/// N x H vote counts. Single writer; parallel pipelines merge() their own accumulators.
class VoteAccumulator {
 public:
  VoteAccumulator(std::vector<std::string> concept_names, std::uint32_t head_count)
      : names_(std::move(concept_names)), head_count_(head_count),
        counts_(names_.size() * head_count, 0) {
    if (names_.empty()) throw ValidationError("vote accumulator needs at least one concept");
    if (head_count_ == 0) throw ValidationError("vote accumulator needs at least one head");
  }

  void record(const RelevanceScore& score) {
    if (score.scores.size() != names_.size()) {
      throw ShapeError("relevance score has " + std::to_string(score.scores.size()) +
                       " concepts, accumulator has " + std::to_string(names_.size()));
    }
    if (score.head_id >= head_count_) {
      throw ValidationError("head " + std::to_string(score.head_id) + " >= H = " +
                            std::to_string(head_count_));
    }
    ++counts_[argmax_concept(score.scores) * head_count_ + score.head_id];
    ++total_;
  }

  void merge(const VoteAccumulator& other) {
    if (other.names_ != names_ || other.head_count_ != head_count_) {
      throw ShapeError("cannot merge vote accumulators with different concepts or H");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
  }

  std::uint64_t count(std::size_t concept_index, std::uint32_t head) const {
    return counts_[concept_index * head_count_ + head];
  }
  std::uint64_t total_votes() const noexcept { return total_; }
  std::size_t concept_count() const noexcept { return names_.size(); }
  std::uint32_t head_count() const noexcept { return head_count_; }
  const std::vector<std::string>& concept_names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::uint32_t head_count_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline VoteAccumulator accumulate_vote(VoteAccumulator acc, const RelevanceScore& score) {
  acc.record(score);
  return acc;
}

struct HeadRelevanceVector {
  std::string concept_name;
  std::vector<double> weights;  // length H, unit L1 norm unless degenerate
  bool degenerate = false;      // concept never won a vote; weights all zero

  std::uint32_t head_count() const noexcept { return static_cast<std::uint32_t>(weights.size()); }
};

inline std::vector<HeadRelevanceVector> finalize_hrv(const VoteAccumulator& acc) {
  if (acc.total_votes() == 0) throw EmptyInputError("vote accumulator holds no votes");
  std::vector<HeadRelevanceVector> out;
  out.reserve(acc.concept_count());
  for (std::size_t n = 0; n < acc.concept_count(); ++n) {
    HeadRelevanceVector v{acc.concept_names()[n], std::vector<double>(acc.head_count(), 0.0), false};
    std::uint64_t row_sum = 0;
    for (std::uint32_t h = 0; h < acc.head_count(); ++h) row_sum += acc.count(n, h);
    if (row_sum == 0) {
      v.degenerate = true;
    } else {
      for (std::uint32_t h = 0; h < acc.head_count(); ++h) {
        v.weights[h] = static_cast<double>(acc.count(n, h)) / static_cast<double>(row_sum);
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace detail {

inline HeadSet rank_heads(const HeadRelevanceVector& v, std::size_t k, bool largest) {
  const auto h = v.head_count();
  if (k < 1 || k > h) {
    throw ValidationError("k = " + std::to_string(k) + " outside [1, " + std::to_string(h) + "]");
  }
  std::vector<std::uint32_t> order(h);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return largest ? v.weights[a] > v.weights[b] : v.weights[a] < v.weights[b];
  });
  order.resize(k);
  return HeadSet(std::move(order), h);
}

}  // namespace detail

/// The k heads with the largest weights (ties: lowest head id).
inline HeadSet top_k_heads(const HeadRelevanceVector& v, std::size_t k) {
  return detail::rank_heads(v, k, true);
}

/// The k heads with the smallest weights (ties: lowest head id).
inline HeadSet bottom_k_heads(const HeadRelevanceVector& v, std::size_t k) {
  return detail::rank_heads(v, k, false);
}

inline const HeadRelevanceVector& find_concept(const std::vector<HeadRelevanceVector>& hrvs,
                                               const std::string& name) {
  for (const auto& v : hrvs) {
    if (v.concept_name == name) return v;
  }
  std::string available;
  for (const auto& v : hrvs) {
    if (!available.empty()) available += ", ";
    available += v.concept_name;
  }
  throw ConfigError("unknown concept '" + name + "'; available: " + available);
}

// HRV JSON: {"concept": [w_0, ..., w_{H-1}], ...}, keys sorted, 17 significant digits.
inline std::string hrv_to_json(const std::vector<HeadRelevanceVector>& hrvs) {
  std::vector<const HeadRelevanceVector*> sorted;
  for (const auto& v : hrvs) sorted.push_back(&v);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->concept_name < b->concept_name; });
  std::ostringstream os;
  os << "{\n";
  char buf[32];
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    os << "  " << nlohmann::json(sorted[i]->concept_name).dump() << ": [";
    for (std::size_t h = 0; h < sorted[i]->weights.size(); ++h) {
      std::snprintf(buf, sizeof buf, "%.17g", sorted[i]->weights[h]);
      os << (h ? ", " : "") << buf;
    }
    os << "]" << (i + 1 < sorted.size() ? ",\n" : "\n");
  }
  os << "}\n";
  return os.str();
}

inline void write_hrv_json(const std::vector<HeadRelevanceVector>& hrvs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << hrv_to_json(hrvs);
  if (!out) throw IoError("failed writing " + path);
}

inline std::vector<HeadRelevanceVector> read_hrv_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!doc.is_object() || doc.empty()) throw FormatError(path + ": expected a non-empty object");
  std::vector<HeadRelevanceVector> out;
  std::size_t head_count = 0;
  for (const auto& [name, weights] : doc.items()) {
    if (!weights.is_array() || weights.empty()) {
      throw FormatError(path + ": concept '" + name + "' must map to a non-empty array");
    }
    HeadRelevanceVector v{name, {}, false};
    double total = 0.0;
    for (const auto& w : weights) {
      if (!w.is_number()) throw FormatError(path + ": non-numeric weight for '" + name + "'");
      const double x = w.get<double>();
      if (!std::isfinite(x) || x < 0.0) throw FormatError(path + ": invalid weight for '" + name + "'");
      v.weights.push_back(x);
      total += x;
    }
    if (head_count == 0) head_count = v.weights.size();
    if (v.weights.size() != head_count) throw FormatError(path + ": concepts disagree on H");
    v.degenerate = total == 0.0;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace headlens
