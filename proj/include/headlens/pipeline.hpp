#pragma once

// Glue between ATND dumps and the core algorithms, plus an ordered parallel map.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

#include "headlens/aggregation.hpp"
#include "headlens/atnd.hpp"
#include "headlens/hrv.hpp"

namespace headlens {

/// Time-averaged r_h^2 x S map of every head. Kind 0 dumps are read as stored; kind 1
/// dumps are pushed through the attention kernel first.
inline std::vector<AttentionMap> time_averaged_head_maps(const atnd::Dump& dump) {
  if (dump.kind == atnd::ContentKind::kConceptKeys) {
    throw FormatError("concept key dumps hold no spatial attention");
  }
  std::vector<AttentionMap> out;
  out.reserve(dump.head_count());
  for (std::uint32_t h = 0; h < dump.head_count(); ++h) {
    std::vector<AttentionMap> steps;
    steps.reserve(dump.timesteps);
    if (dump.kind == atnd::ContentKind::kMaps) {
      for (std::uint32_t t = 0; t < dump.timesteps; ++t) steps.push_back(atnd::stored_map(dump, h, t));
    } else {
      const KeyMatrix keys = atnd::key_matrix(dump, h);
      for (std::uint32_t t = 0; t < dump.timesteps; ++t) {
        steps.push_back(compute_attention_map(atnd::query_matrix(dump, h, t), keys));
      }
    }
    out.push_back(time_average(steps));
  }
  return out;
}

/// Adds one vote per (head, timestep) of a raw Q/K dump.
inline void accumulate_hrv_votes(const atnd::Dump& queries, const atnd::Dump& concept_keys,
                                 VoteAccumulator& acc) {
  atnd::require_kind(queries, atnd::ContentKind::kQueryKey, "HRV construction");
  atnd::require_kind(concept_keys, atnd::ContentKind::kConceptKeys, "HRV construction");
  if (queries.head_count() != concept_keys.head_count() || queries.head_count() != acc.head_count()) {
    throw ShapeError("head count mismatch: queries " + std::to_string(queries.head_count()) +
                     ", concept keys " + std::to_string(concept_keys.head_count()) +
                     ", accumulator " + std::to_string(acc.head_count()));
  }
  for (std::uint32_t h = 0; h < queries.head_count(); ++h) {
    const ConceptKeySet keys = atnd::concept_keys(concept_keys, h);
    for (std::uint32_t t = 0; t < queries.timesteps; ++t) {
      acc.record(spatial_mean(hrv_attention(atnd::query_matrix(queries, h, t), keys)));
    }
  }
}

/// Aggregate stored as a kind 0 dump with one head and one timestep.
inline atnd::Dump to_dump(const AggregatedMap& agg, std::vector<std::string> labels = {}) {
  atnd::Dump dump;
  dump.kind = atnd::ContentKind::kMaps;
  dump.timesteps = 1;
  dump.token_count = static_cast<std::uint32_t>(agg.token_count());
  dump.d_k = 0;
  dump.labels = std::move(labels);
  atnd::Head head;
  head.resolution = static_cast<std::uint32_t>(agg.resolution());
  const std::size_t plane = agg.resolution() * agg.resolution();
  head.data.resize(plane * agg.token_count());
  // Aggregates are slice-major; ATND maps are pixel-major.
  for (std::size_t s = 0; s < agg.token_count(); ++s) {
    const auto slice = agg.slice_values(s);
    for (std::size_t p = 0; p < plane; ++p) {
      head.data[p * agg.token_count() + s] = static_cast<float>(slice[p]);
    }
  }
  dump.heads.push_back(std::move(head));
  return dump;
}

/// Inverse of to_dump. Aggregates are not row-stochastic, so only shape is checked.
inline AggregatedMap aggregated_from_dump(const atnd::Dump& dump) {
  atnd::require_kind(dump, atnd::ContentKind::kMaps, "aggregate");
  if (dump.head_count() != 1 || dump.timesteps != 1) {
    throw ShapeError("aggregate dumps hold exactly one head and one timestep, got H=" +
                     std::to_string(dump.head_count()) + " T=" + std::to_string(dump.timesteps));
  }
  const std::size_t r = dump.heads[0].resolution;
  const std::size_t s_count = dump.token_count;
  const std::size_t plane = r * r;
  std::vector<double> values(plane * s_count);
  const auto& data = dump.heads[0].data;
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t p = 0; p < plane; ++p) values[s * plane + p] = data[p * s_count + s];
  }
  return AggregatedMap(r, s_count, std::move(values));
}

/// Runs fn(0..n-1) on up to `jobs` threads and returns the results in index order.
/// The exception of the lowest failing index is rethrown after all workers stop.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t jobs, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace headlens
