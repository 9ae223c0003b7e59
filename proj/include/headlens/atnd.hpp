#pragma once

// ATND: little-endian binary container for attention tensors.
//
//   offset  size  field
//   0       4     magic "ATND"
//   4       2     version (u16, currently 1)
//   6       2     flags (u16; bit 0 = label table follows the payload)
//   8       4     H  heads
//   12      4     T  timesteps
//   16      4     S  tokens (concepts for kind 2)
//   20      4     d_k (0 for kind 0)
//   24      1     content kind: 0 maps, 1 raw Q/K, 2 concept keys
//   25      12*H  per head: r_h (u32), absolute payload offset (u64)
//   ...           payload, f32, heads contiguous in id order:
//                   kind 0: T blocks of r_h^2 x S attention maps
//                   kind 1: S x d_k keys, then T blocks of r_h^2 x d_k queries
//                   kind 2: S x d_k concept keys (T = 1, r_h = 1)
//   ...           optional label table: u32 count (= S), then per label u32 length + UTF-8
//
// All matrices are row-major; spatial rows are ordered y-major then x.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "headlens/attention.hpp"
#include "headlens/error.hpp"
#include "headlens/hrv.hpp"
#include "headlens/matrix.hpp"

namespace headlens::atnd {

inline constexpr std::array<char, 4> kMagic = {'A', 'T', 'N', 'D'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint16_t kFlagLabels = 0x1;
inline constexpr std::size_t kHeaderSize = 25;
inline constexpr std::size_t kHeadEntrySize = 12;

enum class ContentKind : std::uint8_t { kMaps = 0, kQueryKey = 1, kConceptKeys = 2 };

enum class Errc {
  kIo = 1,
  kBadMagic,
  kBadVersion,
  kBadHeader,
  kTruncated,
  kOffsetOverlap,
  kOffsetGap,
  kTrailingBytes,
  kNonFinite,
  kBadLabels,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::kIo: return "io";
    case Errc::kBadMagic: return "bad magic";
    case Errc::kBadVersion: return "unsupported version";
    case Errc::kBadHeader: return "invalid header";
    case Errc::kTruncated: return "truncated";
    case Errc::kOffsetOverlap: return "offset overlap";
    case Errc::kOffsetGap: return "offset gap";
    case Errc::kTrailingBytes: return "trailing bytes";
    case Errc::kNonFinite: return "non-finite value";
    case Errc::kBadLabels: return "invalid label table";
  }
  return "unknown";
}

inline ErrorKind error_kind(Errc code) {
  switch (code) {
    case Errc::kIo: return ErrorKind::kIo;
    case Errc::kBadHeader:
    case Errc::kNonFinite: return ErrorKind::kValidation;
    default: return ErrorKind::kFormat;
  }
}

class AtndError : public Error {
 public:
  AtndError(Errc code, const std::string& what)
      : Error(error_kind(code), std::string("ATND ") + to_string(code) + ": " + what),
        code_(code), detail_(what) {}
  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

struct Head {
  std::uint32_t resolution = 1;
  std::vector<float> keys;  // S x d_k, kinds 1 and 2
  std::vector<float> data;  // T consecutive blocks, kinds 0 and 1
};

/// In-memory ATND contents. Values keep their f32 storage so round trips are bitwise.
struct Dump {
  ContentKind kind = ContentKind::kMaps;
  std::uint32_t timesteps = 1;
  std::uint32_t token_count = 1;
  std::uint32_t d_k = 0;
  std::vector<Head> heads;
  std::vector<std::string> labels;  // empty, or one per token/concept

  std::uint32_t head_count() const noexcept { return static_cast<std::uint32_t>(heads.size()); }

  std::size_t key_floats() const noexcept {
    return kind == ContentKind::kMaps ? 0 : std::size_t{token_count} * d_k;
  }
  std::size_t block_floats(std::uint32_t h) const noexcept {
    const std::size_t pixels = std::size_t{heads[h].resolution} * heads[h].resolution;
    switch (kind) {
      case ContentKind::kMaps: return pixels * token_count;
      case ContentKind::kQueryKey: return pixels * d_k;
      case ContentKind::kConceptKeys: return 0;
    }
    return 0;
  }

  std::span<const float> block(std::uint32_t h, std::uint32_t t) const {
    const std::size_t n = block_floats(h);
    return {heads.at(h).data.data() + std::size_t{t} * n, n};
  }
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
  return std::uint64_t{get_u32(p)} | (std::uint64_t{get_u32(p + 4)} << 32);
}

// a * b, or nullopt on overflow.
inline std::optional<std::uint64_t> mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::nullopt;
  return a * b;
}
inline std::optional<std::uint64_t> add(std::uint64_t a, std::uint64_t b) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a) return std::nullopt;
  return a + b;
}

// Float count of one head's payload, nullopt on overflow.
inline std::optional<std::uint64_t> head_floats(ContentKind kind, std::uint64_t r, std::uint64_t t,
                                                std::uint64_t s, std::uint64_t d_k) {
  const auto pixels = mul(r, r);
  if (!pixels) return std::nullopt;
  switch (kind) {
    case ContentKind::kMaps: {
      const auto block = mul(*pixels, s);
      return block ? mul(*block, t) : std::nullopt;
    }
    case ContentKind::kQueryKey: {
      const auto keys = mul(s, d_k);
      const auto block = mul(*pixels, d_k);
      if (!keys || !block) return std::nullopt;
      const auto blocks = mul(*block, t);
      return blocks ? add(*keys, *blocks) : std::nullopt;
    }
    case ContentKind::kConceptKeys: return mul(s, d_k);
  }
  return std::nullopt;
}

inline void check_header_fields(std::uint8_t kind, std::uint32_t h, std::uint32_t t,
                                std::uint32_t s, std::uint32_t d_k) {
  if (kind > 2) throw AtndError(Errc::kBadHeader, "content kind " + std::to_string(kind));
  if (h == 0 || t == 0 || s == 0) throw AtndError(Errc::kBadHeader, "H, T and S must be >= 1");
  const auto k = static_cast<ContentKind>(kind);
  if (k == ContentKind::kMaps && d_k != 0) throw AtndError(Errc::kBadHeader, "d_k must be 0 for maps");
  if (k != ContentKind::kMaps && d_k == 0) throw AtndError(Errc::kBadHeader, "d_k must be >= 1");
  if (k == ContentKind::kConceptKeys && t != 1) {
    throw AtndError(Errc::kBadHeader, "concept-key dumps must declare T = 1");
  }
}

inline void check_finite(std::span<const float> values, std::uint32_t head) {
  for (float f : values) {
    if (!std::isfinite(f)) {
      throw AtndError(Errc::kNonFinite, "head " + std::to_string(head) + " holds NaN/Inf");
    }
  }
}

}  // namespace detail

/// Checks every invariant of an in-memory dump; throws AtndError.
inline void validate(const Dump& dump) {
  detail::check_header_fields(static_cast<std::uint8_t>(dump.kind), dump.head_count(), dump.timesteps,
                              dump.token_count, dump.d_k);
  for (std::uint32_t h = 0; h < dump.head_count(); ++h) {
    const Head& head = dump.heads[h];
    if (head.resolution == 0) {
      throw AtndError(Errc::kBadHeader, "head " + std::to_string(h) + " declares r_h = 0");
    }
    if (dump.kind == ContentKind::kConceptKeys && head.resolution != 1) {
      throw AtndError(Errc::kBadHeader, "concept-key heads must declare r_h = 1");
    }
    if (head.keys.size() != dump.key_floats() ||
        head.data.size() != dump.block_floats(h) * dump.timesteps) {
      throw AtndError(Errc::kBadHeader, "head " + std::to_string(h) + " payload size mismatch");
    }
    detail::check_finite(head.keys, h);
    detail::check_finite(head.data, h);
  }
  if (!dump.labels.empty() && dump.labels.size() != dump.token_count) {
    throw AtndError(Errc::kBadLabels, "label count " + std::to_string(dump.labels.size()) +
                                          " != S = " + std::to_string(dump.token_count));
  }
}

inline std::vector<std::uint8_t> encode(const Dump& dump) {
  validate(dump);
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  detail::put_u16(out, kVersion);
  detail::put_u16(out, dump.labels.empty() ? 0 : kFlagLabels);
  detail::put_u32(out, dump.head_count());
  detail::put_u32(out, dump.timesteps);
  detail::put_u32(out, dump.token_count);
  detail::put_u32(out, dump.d_k);
  out.push_back(static_cast<std::uint8_t>(dump.kind));
  std::uint64_t offset = kHeaderSize + kHeadEntrySize * std::uint64_t{dump.head_count()};
  for (const Head& head : dump.heads) {
    detail::put_u32(out, head.resolution);
    detail::put_u64(out, offset);
    offset += 4 * (head.keys.size() + head.data.size());
  }
  for (const Head& head : dump.heads) {
    detail::put_floats(out, head.keys);
    detail::put_floats(out, head.data);
  }
  if (!dump.labels.empty()) {
    detail::put_u32(out, static_cast<std::uint32_t>(dump.labels.size()));
    for (const auto& label : dump.labels) {
      detail::put_u32(out, static_cast<std::uint32_t>(label.size()));
      out.insert(out.end(), label.begin(), label.end());
    }
  }
  return out;
}

/// Parses and fully validates a byte image. Nothing is allocated beyond the sizes implied
/// by the header, and those are checked against the input length first.
inline Dump decode(std::span<const std::uint8_t> bytes) {
  using detail::get_u32;
  if (bytes.size() < kHeaderSize) throw AtndError(Errc::kTruncated, "header needs 25 bytes");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw AtndError(Errc::kBadMagic, "expected \"ATND\"");
  }
  const std::uint16_t version = detail::get_u16(bytes.data() + 4);
  if (version != kVersion) throw AtndError(Errc::kBadVersion, "version " + std::to_string(version));
  const std::uint16_t flags = detail::get_u16(bytes.data() + 6);
  if (flags & ~kFlagLabels) throw AtndError(Errc::kBadHeader, "unknown flag bits");
  const std::uint32_t h = get_u32(bytes.data() + 8);
  const std::uint32_t t = get_u32(bytes.data() + 12);
  const std::uint32_t s = get_u32(bytes.data() + 16);
  const std::uint32_t d_k = get_u32(bytes.data() + 20);
  const std::uint8_t kind = bytes[24];
  detail::check_header_fields(kind, h, t, s, d_k);

  const std::uint64_t size = bytes.size();
  const std::uint64_t table_end = kHeaderSize + kHeadEntrySize * std::uint64_t{h};
  if (table_end > size) throw AtndError(Errc::kTruncated, "head table extends past end of file");

  Dump dump;
  dump.kind = static_cast<ContentKind>(kind);
  dump.timesteps = t;
  dump.token_count = s;
  dump.d_k = d_k;

  // Structural pass: offsets and sizes only.
  std::vector<std::uint64_t> float_counts(h);
  std::uint64_t cursor = table_end;
  for (std::uint32_t i = 0; i < h; ++i) {
    const std::uint8_t* entry = bytes.data() + kHeaderSize + kHeadEntrySize * i;
    const std::uint32_t r = get_u32(entry);
    const std::uint64_t offset = detail::get_u64(entry + 4);
    if (r == 0) throw AtndError(Errc::kBadHeader, "head " + std::to_string(i) + " declares r_h = 0");
    if (dump.kind == ContentKind::kConceptKeys && r != 1) {
      throw AtndError(Errc::kBadHeader, "concept-key heads must declare r_h = 1");
    }
    if (offset < cursor) throw AtndError(Errc::kOffsetOverlap, "head " + std::to_string(i));
    if (offset > cursor) throw AtndError(Errc::kOffsetGap, "head " + std::to_string(i));
    const auto floats = detail::head_floats(dump.kind, r, t, s, d_k);
    const auto nbytes = floats ? detail::mul(*floats, 4) : std::nullopt;
    const auto end = nbytes ? detail::add(cursor, *nbytes) : std::nullopt;
    if (!end || *end > size) {
      throw AtndError(Errc::kTruncated, "payload of head " + std::to_string(i) + " exceeds file");
    }
    float_counts[i] = *floats;
    cursor = *end;
  }

  std::vector<std::string> labels;
  if (flags & kFlagLabels) {
    if (size - cursor < 4) throw AtndError(Errc::kTruncated, "label table header missing");
    const std::uint32_t count = get_u32(bytes.data() + cursor);
    cursor += 4;
    if (count != s) {
      throw AtndError(Errc::kBadLabels, "label count " + std::to_string(count) + " != S = " + std::to_string(s));
    }
    labels.reserve(std::min<std::uint64_t>(count, (size - cursor) / 4));
    for (std::uint32_t i = 0; i < count; ++i) {
      if (size - cursor < 4) throw AtndError(Errc::kTruncated, "label table");
      const std::uint32_t len = get_u32(bytes.data() + cursor);
      cursor += 4;
      if (len > size - cursor) throw AtndError(Errc::kTruncated, "label table");
      labels.emplace_back(reinterpret_cast<const char*>(bytes.data() + cursor), len);
      cursor += len;
    }
  }
  if (cursor != size) {
    throw AtndError(Errc::kTrailingBytes, std::to_string(size - cursor) + " unexpected bytes");
  }

  // Copy pass.
  dump.heads.resize(h);
  cursor = table_end;
  const std::size_t key_count = dump.key_floats();
  for (std::uint32_t i = 0; i < h; ++i) {
    Head& head = dump.heads[i];
    head.resolution = get_u32(bytes.data() + kHeaderSize + kHeadEntrySize * i);
    const std::size_t total = static_cast<std::size_t>(float_counts[i]);
    std::vector<float> values(total);
    for (std::size_t j = 0; j < total; ++j) {
      values[j] = std::bit_cast<float>(get_u32(bytes.data() + cursor + 4 * j));
    }
    cursor += 4 * total;
    detail::check_finite(values, i);
    head.keys.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(key_count));
    values.erase(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(key_count));
    head.data = std::move(values);
  }
  dump.labels = std::move(labels);
  return dump;
}

/// Writes via a temporary sibling file and renames it into place.
inline void write(const Dump& dump, const std::filesystem::path& path) {
  const auto bytes = encode(dump);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw AtndError(Errc::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw AtndError(Errc::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw AtndError(Errc::kIo, "cannot rename into " + path.string() + ": " + ec.message());
}

inline Dump read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AtndError(Errc::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const AtndError& e) {
    throw AtndError(e.code(), path.string() + ": " + e.detail());
  }
}

// Typed views -----------------------------------------------------------------

inline Matrix to_matrix(std::span<const float> values, std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, std::vector<double>(values.begin(), values.end()));
}

inline std::vector<float> to_floats(std::span<const double> values) {
  return std::vector<float>(values.begin(), values.end());
}

inline void require_kind(const Dump& dump, ContentKind kind, const char* what) {
  if (dump.kind != kind) {
    throw FormatError(std::string(what) + " needs content kind " +
                      std::to_string(static_cast<int>(kind)) + ", dump has " +
                      std::to_string(static_cast<int>(dump.kind)));
  }
}

inline AttentionMap stored_map(const Dump& dump, std::uint32_t h, std::uint32_t t) {
  require_kind(dump, ContentKind::kMaps, "stored_map");
  const std::uint32_t r = dump.heads.at(h).resolution;
  return AttentionMap(h, t, r, to_matrix(dump.block(h, t), std::size_t{r} * r, dump.token_count),
                      kStoredRowSumTolerance);
}

inline QueryMatrix query_matrix(const Dump& dump, std::uint32_t h, std::uint32_t t) {
  require_kind(dump, ContentKind::kQueryKey, "query_matrix");
  const std::uint32_t r = dump.heads.at(h).resolution;
  return QueryMatrix(h, t, r, to_matrix(dump.block(h, t), std::size_t{r} * r, dump.d_k));
}

inline KeyMatrix key_matrix(const Dump& dump, std::uint32_t h) {
  require_kind(dump, ContentKind::kQueryKey, "key_matrix");
  return KeyMatrix(to_matrix(dump.heads.at(h).keys, dump.token_count, dump.d_k));
}

inline std::vector<std::string> concept_names(const Dump& dump) {
  if (!dump.labels.empty()) return dump.labels;
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < dump.token_count; ++i) names.push_back("concept_" + std::to_string(i));
  return names;
}

inline ConceptKeySet concept_keys(const Dump& dump, std::uint32_t h) {
  require_kind(dump, ContentKind::kConceptKeys, "concept_keys");
  return ConceptKeySet(h, to_matrix(dump.heads.at(h).keys, dump.token_count, dump.d_k),
                       concept_names(dump));
}

}  // namespace headlens::atnd
