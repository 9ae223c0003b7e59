#pragma once

// Cross-attention maps: row softmax of scaled query/key logits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "headlens/error.hpp"
#include "headlens/matrix.hpp"

namespace headlens {

/// Row-sum tolerance for maps computed in double precision.
inline constexpr double kRowSumTolerance = 1e-6;
/// Row-sum tolerance for maps that went through f32 storage.
inline constexpr double kStoredRowSumTolerance = 1e-4;

/// Spatial queries of one head at one timestep: r_h^2 rows (row-major y, x) by d_k.
class QueryMatrix {
 public:
  QueryMatrix(std::uint32_t head_id, std::uint32_t timestep, std::uint32_t resolution,
              Matrix values)
      : head_id_(head_id), timestep_(timestep), resolution_(resolution),
        values_(std::move(values)) {
    if (resolution_ == 0) throw ValidationError("query resolution must be >= 1");
    if (values_.cols() == 0) throw ValidationError("query d_k must be >= 1");
    const std::size_t pixels = std::size_t{resolution_} * resolution_;
    if (values_.rows() != pixels) {
      throw ShapeError("query matrix has " + std::to_string(values_.rows()) +
                       " rows, expected r_h^2 = " + std::to_string(pixels));
    }
    if (!values_.all_finite()) throw ValidationError("query matrix contains NaN/Inf");
  }

  std::uint32_t head_id() const noexcept { return head_id_; }
  std::uint32_t timestep() const noexcept { return timestep_; }
  std::uint32_t resolution() const noexcept { return resolution_; }
  std::size_t d_k() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  std::uint32_t head_id_;
  std::uint32_t timestep_;
  std::uint32_t resolution_;
  Matrix values_;
};

/// Prompt-token keys of one head: S rows by d_k.
class KeyMatrix {
 public:
  explicit KeyMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() == 0) throw ValidationError("key matrix needs at least one token");
    if (values_.cols() == 0) throw ValidationError("key d_k must be >= 1");
    if (!values_.all_finite()) throw ValidationError("key matrix contains NaN/Inf");
  }

  std::size_t token_count() const noexcept { return values_.rows(); }
  std::size_t d_k() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

/// One head's r_h^2 x S row-stochastic attention map at one timestep.
class AttentionMap {
 public:
  AttentionMap(std::uint32_t head_id, std::uint32_t timestep, std::uint32_t resolution,
               Matrix values, double row_sum_tolerance = kRowSumTolerance)
      : head_id_(head_id), timestep_(timestep), resolution_(resolution),
        values_(std::move(values)) {
    if (resolution_ == 0) throw ValidationError("attention map resolution must be >= 1");
    const std::size_t pixels = std::size_t{resolution_} * resolution_;
    if (values_.rows() != pixels || values_.cols() == 0) {
      throw ShapeError("attention map is " + shape_string(values_) + ", expected " +
                       std::to_string(pixels) + "xS");
    }
    for (std::size_t r = 0; r < values_.rows(); ++r) {
      double sum = 0.0;
      for (double v : values_.row(r)) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
          throw ValidationError("attention map entry outside [0,1] in row " +
                                std::to_string(r) + " of head " + std::to_string(head_id_));
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > row_sum_tolerance) {
        throw ValidationError("attention map row " + std::to_string(r) + " of head " +
                              std::to_string(head_id_) + " sums to " + std::to_string(sum));
      }
    }
  }

  std::uint32_t head_id() const noexcept { return head_id_; }
  std::uint32_t timestep() const noexcept { return timestep_; }
  std::uint32_t resolution() const noexcept { return resolution_; }
  std::size_t token_count() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  std::uint32_t head_id_;
  std::uint32_t timestep_;
  std::uint32_t resolution_;
  Matrix values_;
};

/// Prompt tokens plus the sub-token indices of the word of interest.
class TokenInfo {
 public:
  TokenInfo(std::vector<std::string> token_strings, std::vector<std::size_t> target_indices)
      : tokens_(std::move(token_strings)), targets_(std::move(target_indices)) {
    if (targets_.empty()) throw ValidationError("target token index list is empty");
    for (std::size_t i = 0; i < targets_.size(); ++i) {
      if (targets_[i] >= tokens_.size()) {
        throw ValidationError("target token index " + std::to_string(targets_[i]) +
                              " out of range for " + std::to_string(tokens_.size()) + " tokens");
      }
      if (i > 0 && targets_[i] <= targets_[i - 1]) {
        throw ValidationError("target token indices must be strictly increasing");
      }
    }
  }

  const std::vector<std::string>& token_strings() const noexcept { return tokens_; }
  const std::vector<std::size_t>& target_indices() const noexcept { return targets_; }
  std::size_t token_count() const noexcept { return tokens_.size(); }

  /// Target sub-tokens joined with '+', e.g. "dog" or "ele+phant".
  std::string target_label() const {
    std::string label;
    for (std::size_t i : targets_) {
      if (!label.empty()) label += '+';
      label += tokens_[i];
    }
    return label;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> targets_;
};

/// Numerically stable softmax of every row (each row is shifted by its max).
inline Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto in = m.row(r);
    double peak = -INFINITY;
    for (double v : in) {
      if (!std::isfinite(v)) {
        throw ValidationError("softmax input row " + std::to_string(r) + " is not finite");
      }
      peak = std::max(peak, v);
    }
    auto dst = out.row(r);
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - peak);
      sum += dst[c];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

/// Q * K^T / sqrt(d_k). Both operands are row-major with d_k columns.
inline Matrix scaled_logits(const Matrix& queries, const Matrix& keys) {
  if (queries.cols() != keys.cols()) {
    throw ShapeError("d_k mismatch: queries " + shape_string(queries) + " vs keys " +
                     shape_string(keys));
  }
  const std::size_t d_k = queries.cols();
  const double scale = std::sqrt(static_cast<double>(d_k));
  Matrix logits(queries.rows(), keys.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto q = queries.row(i);
    for (std::size_t j = 0; j < keys.rows(); ++j) {
      const auto k = keys.row(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < d_k; ++c) dot += q[c] * k[c];
      logits(i, j) = dot / scale;
    }
  }
  return logits;
}

/// softmax(Q K^T / sqrt(d_k)) for one head and timestep.
inline AttentionMap compute_attention_map(const QueryMatrix& q, const KeyMatrix& k) {
  if (q.d_k() != k.d_k()) {
    throw ShapeError("d_k mismatch: query (head " + std::to_string(q.head_id()) + ") has " +
                     std::to_string(q.d_k()) + ", key has " + std::to_string(k.d_k()));
  }
  return AttentionMap(q.head_id(), q.timestep(), q.resolution(),
                      softmax_rows(scaled_logits(q.values(), k.values())));
}

}  // namespace headlens
