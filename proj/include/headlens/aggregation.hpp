#pragma once

// Time averaging, per-head bicubic upscaling and head averaging of attention maps:
// all heads (DAAM) or a selected head subset.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "headlens/attention.hpp"
#include "headlens/error.hpp"
#include "headlens/matrix.hpp"
#include "headlens/resample.hpp"

namespace headlens {

inline constexpr std::size_t kDefaultTargetResolution = 64;
inline constexpr std::size_t kMaxTargetResolution = 512;

/// Ordered set of distinct head ids, all below head_count.
class HeadSet {
 public:
  HeadSet(std::vector<std::uint32_t> ids, std::uint32_t head_count) : head_count_(head_count) {
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw ValidationError("head set is empty");
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw ValidationError("head set contains duplicate ids");
    }
    if (ids.back() >= head_count_) {
      throw ValidationError("head id " + std::to_string(ids.back()) + " >= H = " +
                            std::to_string(head_count_));
    }
    ids_ = std::move(ids);
  }

  static HeadSet all(std::uint32_t head_count) {
    std::vector<std::uint32_t> ids(head_count);
    std::iota(ids.begin(), ids.end(), 0u);
    return HeadSet(std::move(ids), head_count);
  }

  const std::vector<std::uint32_t>& ids() const noexcept { return ids_; }
  std::uint32_t head_count() const noexcept { return head_count_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(std::uint32_t id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
  }

  friend bool operator==(const HeadSet&, const HeadSet&) = default;

 private:
  std::vector<std::uint32_t> ids_;
  std::uint32_t head_count_;
};

/// r x r x S token heatmap stack, stored slice-major: value(s, y, x).
class AggregatedMap {
 public:
  AggregatedMap(std::size_t resolution, std::size_t token_count, std::vector<double> values)
      : resolution_(resolution), tokens_(token_count), values_(std::move(values)) {
    if (resolution_ == 0 || tokens_ == 0) throw ValidationError("aggregated map must be non-empty");
    if (values_.size() != resolution_ * resolution_ * tokens_) {
      throw ShapeError("aggregated map holds " + std::to_string(values_.size()) +
                       " values, expected r*r*S = " +
                       std::to_string(resolution_ * resolution_ * tokens_));
    }
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("aggregated map entry is negative or non-finite");
    }
  }

  std::size_t resolution() const noexcept { return resolution_; }
  std::size_t token_count() const noexcept { return tokens_; }

  double operator()(std::size_t s, std::size_t y, std::size_t x) const {
    return values_[(s * resolution_ + y) * resolution_ + x];
  }

  std::span<const double> slice_values(std::size_t s) const {
    const std::size_t n = resolution_ * resolution_;
    return {values_.data() + s * n, n};
  }

  Matrix slice(std::size_t s) const {
    const auto v = slice_values(s);
    return Matrix(resolution_, resolution_, std::vector<double>(v.begin(), v.end()));
  }

  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const AggregatedMap&, const AggregatedMap&) = default;

 private:
  std::size_t resolution_;
  std::size_t tokens_;
  std::vector<double> values_;
};

/// Max-normalized r x r heatmap of one target word.
class TokenHeatmap {
 public:
  explicit TokenHeatmap(Matrix values) : values_(std::move(values)) {
    if (values_.rows() == 0 || values_.rows() != values_.cols()) {
      throw ShapeError("token heatmap must be square and non-empty, got " + shape_string(values_));
    }
    for (double v : values_.values()) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("token heatmap entry outside [0,1]");
    }
  }

  std::size_t resolution() const noexcept { return values_.rows(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

/// Elementwise mean over timesteps of one head's maps.
inline AttentionMap time_average(std::span<const AttentionMap> maps) {
  if (maps.empty()) throw ValidationError("time_average needs at least one map");
  const AttentionMap& first = maps.front();
  if (maps.size() == 1) return first;
  Matrix sum(first.values().rows(), first.values().cols());
  for (const AttentionMap& m : maps) {
    if (m.head_id() != first.head_id() || m.resolution() != first.resolution() ||
        m.token_count() != first.token_count()) {
      throw ShapeError("time_average: map of head " + std::to_string(m.head_id()) + " (r_h " +
                       std::to_string(m.resolution()) + ", S " +
                       std::to_string(m.token_count()) + ") does not match head " +
                       std::to_string(first.head_id()));
    }
    const auto src = m.values().values();
    auto dst = sum.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const double count = static_cast<double>(maps.size());
  for (double& v : sum.values()) v /= count;
  return AttentionMap(first.head_id(), 0, first.resolution(), std::move(sum), 2e-6);
}

/// Column `token` of an r_h^2 x S map as an r_h x r_h image.
inline Matrix token_slice(const AttentionMap& map, std::size_t token) {
  const std::size_t r = map.resolution();
  Matrix out(r, r);
  const Matrix& v = map.values();
  for (std::size_t p = 0; p < r * r; ++p) out.values()[p] = v(p, token);
  return out;
}

namespace detail {

// Per-head time-averaged maps sorted by head id; rejects duplicates and mixed S.
inline std::vector<const AttentionMap*> sorted_heads(std::span<const AttentionMap> maps) {
  std::vector<const AttentionMap*> order;
  order.reserve(maps.size());
  for (const AttentionMap& m : maps) order.push_back(&m);
  std::sort(order.begin(), order.end(),
            [](const AttentionMap* a, const AttentionMap* b) { return a->head_id() < b->head_id(); });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->head_id() == order[i - 1]->head_id()) {
      throw ValidationError("duplicate map for head " + std::to_string(order[i]->head_id()));
    }
    if (order[i]->token_count() != order[0]->token_count()) {
      throw ShapeError("head " + std::to_string(order[i]->head_id()) + " has S = " +
                       std::to_string(order[i]->token_count()) + ", expected " +
                       std::to_string(order[0]->token_count()));
    }
  }
  return order;
}

inline std::string id_list(const std::vector<std::uint32_t>& ids) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ',';
    out += std::to_string(id);
  }
  return out;
}

// Upscale each token slice of each selected head and average with weight 1/|heads|,
// accumulating in ascending head-id order.
inline AggregatedMap average_heads(const std::vector<const AttentionMap*>& heads,
                                   std::size_t target_r) {
  if (heads.empty()) throw ValidationError("no heads to aggregate");
  if (target_r == 0 || target_r > kMaxTargetResolution) {
    throw ValidationError("target resolution must be in [1, " +
                          std::to_string(kMaxTargetResolution) + "]");
  }
  const std::size_t tokens = heads.front()->token_count();
  const std::size_t plane = target_r * target_r;
  std::vector<double> sum(plane * tokens, 0.0);
  for (const AttentionMap* head : heads) {
    if (head->resolution() > target_r) {
      throw ValidationError("downscale not supported: head " + std::to_string(head->head_id()) +
                            " has r_h " + std::to_string(head->resolution()) + " > target " +
                            std::to_string(target_r));
    }
    for (std::size_t s = 0; s < tokens; ++s) {
      const Matrix up = bicubic_upscale(token_slice(*head, s), target_r);
      const auto src = up.values();
      double* dst = sum.data() + s * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  }
  const double count = static_cast<double>(heads.size());
  for (double& v : sum) v /= count;
  return AggregatedMap(target_r, tokens, std::move(sum));
}

}  // namespace detail

/// Average of all H heads' upscaled time-averaged maps.
inline AggregatedMap aggregate_daam(std::span<const AttentionMap> per_head_maps,
                                    std::uint32_t head_count,
                                    std::size_t target_r = kDefaultTargetResolution) {
  auto heads = detail::sorted_heads(per_head_maps);
  std::vector<std::uint32_t> missing;
  std::size_t next = 0;
  for (std::uint32_t h = 0; h < head_count; ++h) {
    if (next < heads.size() && heads[next]->head_id() == h) {
      ++next;
    } else {
      missing.push_back(h);
    }
  }
  if (!missing.empty()) throw CompletenessError("missing heads: " + detail::id_list(missing));
  if (next != heads.size()) {
    throw ValidationError("map for head " + std::to_string(heads[next]->head_id()) +
                          " is outside H = " + std::to_string(head_count));
  }
  return detail::average_heads(heads, target_r);
}

/// Average over only the heads in `head_set`.
inline AggregatedMap aggregate_selective(std::span<const AttentionMap> per_head_maps,
                                         const HeadSet& head_set,
                                         std::size_t target_r = kDefaultTargetResolution) {
  if (head_set.size() == 0) throw ValidationError("empty head set");
  const auto heads = detail::sorted_heads(per_head_maps);
  std::vector<const AttentionMap*> chosen;
  std::vector<std::uint32_t> missing;
  std::size_t cursor = 0;
  for (std::uint32_t id : head_set.ids()) {
    while (cursor < heads.size() && heads[cursor]->head_id() < id) ++cursor;
    if (cursor < heads.size() && heads[cursor]->head_id() == id) {
      chosen.push_back(heads[cursor]);
    } else {
      missing.push_back(id);
    }
  }
  if (!missing.empty()) throw CompletenessError("selected heads not available: " + detail::id_list(missing));
  return detail::average_heads(chosen, target_r);
}

/// Mean of the target word's token slices, resampled to `output_r` when larger than the
/// aggregate resolution, then divided by its maximum. An all-zero slice stays zero.
inline TokenHeatmap extract_token_heatmap(const AggregatedMap& agg, const TokenInfo& tokens,
                                          std::size_t output_r = 0) {
  if (output_r == 0) output_r = agg.resolution();
  for (std::size_t idx : tokens.target_indices()) {
    if (idx >= agg.token_count()) {
      throw ValidationError("token index " + std::to_string(idx) + " out of range for S = " +
                            std::to_string(agg.token_count()));
    }
  }
  const std::size_t r = agg.resolution();
  Matrix mean(r, r);
  for (std::size_t idx : tokens.target_indices()) {
    const auto src = agg.slice_values(idx);
    auto dst = mean.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const double count = static_cast<double>(tokens.target_indices().size());
  for (double& v : mean.values()) v /= count;

  if (output_r != r) mean = bicubic_upscale(mean, output_r);

  const double peak = *std::max_element(mean.values().begin(), mean.values().end());
  if (peak > 0.0) {
    for (double& v : mean.values()) v /= peak;
  }
  return TokenHeatmap(std::move(mean));
}

}  // namespace headlens
