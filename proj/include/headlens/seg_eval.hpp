#pragma once

// Threshold binarization, intersection-over-union and mean-IoU reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "headlens/aggregation.hpp"
#include "headlens/attention.hpp"
#include "headlens/error.hpp"

namespace headlens {

inline const std::vector<double> kDefaultThresholds = {0.3, 0.4, 0.5};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height, bool fill = false)
      : width_(width), height_(height), bits_(width * height, fill ? 1 : 0) {}
  BinaryMask(std::size_t width, std::size_t height, std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    if (bits_.size() != width_ * height_) throw ShapeError("mask bit count does not match dimensions");
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return bits_.size(); }

  bool operator()(std::size_t x, std::size_t y) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool v) { bits_[y * width_ + x] = v ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  /// True when every set pixel of *this is also set in `other`.
  bool subset_of(const BinaryMask& other) const {
    if (other.width_ != width_ || other.height_ != height_) return false;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      if (bits_[i] && !other.bits_[i]) return false;
    }
    return true;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline void check_threshold(double v) {
  if (!(v > 0.0 && v < 1.0)) throw ValidationError("threshold " + std::to_string(v) + " outside (0,1)");
}

/// Pixel set iff heatmap value >= v.
inline BinaryMask threshold_mask(const TokenHeatmap& heatmap, double v) {
  check_threshold(v);
  const std::size_t r = heatmap.resolution();
  BinaryMask mask(r, r);
  const auto values = heatmap.values().values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= v) mask.set(i % r, i / r, true);
  }
  return mask;
}

/// |a & b| / |a | b|; two empty masks score 1.0.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError("mask resolution mismatch: " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()));
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto& ab = a.bits();
  const auto& bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct EvalRecord {
  std::string image_id;
  std::string token;
  std::string method;
  double threshold = 0.0;
  double iou = 0.0;
  bool empty_union = false;
};

inline bool same_threshold(double a, double b) { return std::abs(a - b) < 1e-9; }

/// Mean IoU over records at threshold v, summed in image_id order.
inline double mean_iou(std::vector<EvalRecord> records, double v) {
  std::erase_if(records, [v](const EvalRecord& r) { return !same_threshold(r.threshold, v); });
  if (records.empty()) throw ValidationError("no records at threshold " + std::to_string(v));
  std::stable_sort(records.begin(), records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.image_id < b.image_id; });
  double sum = 0.0;
  for (const auto& r : records) sum += r.iou;
  return sum / static_cast<double>(records.size());
}

/// Token heatmap resampled to the mask resolution. Masks must be square and at least as
/// large as the aggregate.
inline TokenHeatmap heatmap_for_mask(const AggregatedMap& agg, const TokenInfo& tokens,
                                     const BinaryMask& gt) {
  if (gt.width() != gt.height()) {
    throw ShapeError("ground-truth mask must be square, got " + std::to_string(gt.width()) + "x" +
                     std::to_string(gt.height()));
  }
  if (gt.width() < agg.resolution()) {
    throw ShapeError("ground-truth mask " + std::to_string(gt.width()) +
                     " is smaller than aggregate resolution " + std::to_string(agg.resolution()));
  }
  return extract_token_heatmap(agg, tokens, gt.width());
}

struct NamedAggregate {
  std::string method;
  const AggregatedMap* map;
};

/// IoU records for every method and threshold on one image, ordered by method then threshold.
inline std::vector<EvalRecord> evaluate_image(const std::string& image_id,
                                              const std::vector<NamedAggregate>& methods,
                                              const TokenInfo& tokens, const BinaryMask& gt,
                                              const std::vector<double>& thresholds) {
  for (double v : thresholds) check_threshold(v);
  std::vector<EvalRecord> out;
  for (const auto& m : methods) {
    const TokenHeatmap heat = heatmap_for_mask(*m.map, tokens, gt);
    for (double v : thresholds) {
      const BinaryMask pred = threshold_mask(heat, v);
      const bool empty_union = pred.count() == 0 && gt.count() == 0;
      out.push_back({image_id, tokens.target_label(), m.method, v, iou(pred, gt), empty_union});
    }
  }
  return out;
}

struct PairComparison {
  double threshold = 0.0;
  double iou_a = 0.0;
  double iou_b = 0.0;
  double delta = 0.0;  // iou_a - iou_b
};

inline std::vector<PairComparison> evaluate_pair(const AggregatedMap& agg_a,
                                                 const AggregatedMap& agg_b,
                                                 const TokenInfo& tokens, const BinaryMask& gt,
                                                 const std::vector<double>& thresholds) {
  const auto records = evaluate_image("", {{"a", &agg_a}, {"b", &agg_b}}, tokens, gt, thresholds);
  std::vector<PairComparison> out;
  const std::size_t n = thresholds.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = records[i].iou;
    const double b = records[n + i].iou;
    out.push_back({thresholds[i], a, b, a - b});
  }
  return out;
}

inline std::string format_threshold(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// CSV with columns image_id,token,method,threshold,iou in the given record order.
inline std::string records_to_csv(const std::vector<EvalRecord>& records) {
  std::string out = "image_id,token,method,threshold,iou\n";
  char buf[32];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.iou);
    out += r.image_id + ',' + r.token + ',' + r.method + ',' + format_threshold(r.threshold) + ',' +
           buf + '\n';
  }
  return out;
}

/// Mean IoU per method and threshold plus deltas of the first method against each other one.
inline nlohmann::ordered_json summarize(const std::vector<EvalRecord>& records,
                                        const std::vector<std::string>& methods,
                                        const std::vector<double>& thresholds) {
  nlohmann::ordered_json doc;
  doc["thresholds"] = thresholds;
  std::map<std::string, std::vector<double>> means;
  std::size_t images = 0;
  std::size_t empty_unions = 0;
  for (const auto& method : methods) {
    std::vector<EvalRecord> own;
    for (const auto& r : records) {
      if (r.method == method) own.push_back(r);
    }
    nlohmann::ordered_json per;
    for (double v : thresholds) {
      const double m = mean_iou(own, v);
      means[method].push_back(m);
      per[format_threshold(v)] = m;
    }
    doc["mean_iou"][method] = per;
    std::vector<std::string> ids;
    for (const auto& r : own) {
      ids.push_back(r.image_id);
      if (r.empty_union) ++empty_unions;
    }
    std::sort(ids.begin(), ids.end());
    images = std::max<std::size_t>(images, std::unique(ids.begin(), ids.end()) - ids.begin());
  }
  doc["image_count"] = images;
  doc["empty_union_records"] = empty_unions;
  if (methods.size() > 1) {
    for (std::size_t i = 1; i < methods.size(); ++i) {
      nlohmann::ordered_json per;
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        per[format_threshold(thresholds[t])] = means[methods[0]][t] - means[methods[i]][t];
      }
      doc["deltas"][methods[0] + "-" + methods[i]] = per;
    }
  }
  return doc;
}

}  // namespace headlens
