#pragma once

// Binary PGM (P5, maxval 255) masks: pixel >= 128 is set; writers emit 0/255 only.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "headlens/error.hpp"
#include "headlens/seg_eval.hpp"

namespace headlens {

namespace detail {

// Next whitespace-delimited header token, skipping '#' comments.
inline std::string pgm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return token;
}

inline std::size_t pgm_number(const std::string& token, const std::string& what,
                              const std::string& source) {
  if (token.empty() || token.size() > 9) throw FormatError(source + ": bad PGM " + what);
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) throw FormatError(source + ": bad PGM " + what);
  }
  return std::stoul(token);
}

}  // namespace detail

inline BinaryMask decode_mask(const std::vector<std::uint8_t>& bytes, const std::string& source = "mask") {
  std::size_t pos = 0;
  if (detail::pgm_token(bytes, pos) != "P5") throw FormatError(source + ": not a binary PGM (P5)");
  const std::size_t width = detail::pgm_number(detail::pgm_token(bytes, pos), "width", source);
  const std::size_t height = detail::pgm_number(detail::pgm_token(bytes, pos), "height", source);
  const std::size_t maxval = detail::pgm_number(detail::pgm_token(bytes, pos), "maxval", source);
  if (maxval != 255) throw FormatError(source + ": PGM maxval must be 255, got " + std::to_string(maxval));
  if (width == 0 || height == 0) throw FormatError(source + ": empty PGM");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(source + ": truncated PGM header");
  ++pos;
  if (bytes.size() - pos != width * height) {
    throw FormatError(source + ": PGM pixel data has " + std::to_string(bytes.size() - pos) +
                      " bytes, expected " + std::to_string(width * height));
  }
  std::vector<std::uint8_t> bits(width * height);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = bytes[pos + i] >= 128 ? 1 : 0;
  return BinaryMask(width, height, std::move(bits));
}

inline std::vector<std::uint8_t> encode_mask(const BinaryMask& mask) {
  const std::string header =
      "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (auto b : mask.bits()) out.push_back(b ? 255 : 0);
  return out;
}

inline BinaryMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_mask(bytes, path.string());
}

inline void write_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  const auto bytes = encode_mask(mask);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write mask " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing mask " + path.string());
}

}  // namespace headlens
