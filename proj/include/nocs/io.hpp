#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "nocs/error.hpp"
#include "nocs/raster.hpp"

namespace nocs {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

inline void write_bytes(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

inline void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  write_bytes(path, bytes.data(), bytes.size());
}

inline void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text.data(), text.size()); }

/// Little-endian single-channel PFM. Invalid pixels are stored as 0.
inline std::vector<std::uint8_t> encode_pfm(const DepthMap& depth) {
  const std::string header = "Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * static_cast<std::size_t>(depth.width()) * depth.height());
  for (int r = depth.height() - 1; r >= 0; --r)
    for (int c = 0; c < depth.width(); ++c) {
      const float v = depth.is_valid(r, c) ? static_cast<float>(depth.depth(r, c)) : 0.0f;
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  return out;
}

inline DepthMap decode_pfm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto token = [&] {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "Pf") fail(ErrorCode::CorruptStream, "not a single-channel PFM");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    fail(ErrorCode::CorruptStream, "malformed PFM header");
  }
  ++pos;  // single whitespace byte after the scale
  if (w <= 0 || h <= 0 || scale == 0.0) fail(ErrorCode::CorruptStream, "malformed PFM header");
  if (bytes.size() - std::min(pos, bytes.size()) < 4 * static_cast<std::size_t>(w) * h)
    fail(ErrorCode::CorruptStream, "truncated PFM data");
  const bool little = scale < 0.0;
  DepthMap d(w, h);
  for (int r = h - 1; r >= 0; --r)
    for (int c = 0; c < w; ++c) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[pos + (little ? b : 3 - b)]) << (8 * b);
      pos += 4;
      float v;
      std::memcpy(&v, &bits, 4);
      if (std::isfinite(v) && v > 0.0f) {
        d.depth(r, c) = v;
        d.valid(r, c) = 1;
      }
    }
  return d;
}

/// 64-bit FNV-1a, used for content digests.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) h_ = (h_ ^ p[i]) * 0x100000001b3ULL;
  }
  void update(const std::string& s) { update(s.data(), s.size() + 1); }
  std::uint64_t value() const { return h_; }
  std::string hex() const {
    std::ostringstream ss;
    ss << std::hex;
    ss.width(16);
    ss.fill('0');
    ss << h_;
    return ss.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace nocs
