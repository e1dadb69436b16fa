// Copyright 2026 The lcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// -----------------------------------------------------------------------------
//
// On-disk containers shared by every module and the CLI.
//
// TensorFile layout (all little-endian):
//   "LCT1" | rank:u32 | dims:rank x u32 | data:prod(dims) x f32, row-major
//
// CurveFile: CSV with header "rate,quality", rate strictly increasing.

#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lcomp/error.hpp"

namespace lcomp {

static_assert(std::endian::native == std::endian::little,
              "byte-level codecs assume a little-endian host");

// Dense row-major float32 tensor.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::uint32_t> d, std::vector<float> v)
      : dims(std::move(d)), data(std::move(v)) {}

  static std::size_t element_count(std::span<const std::uint32_t> dims) {
    if (dims.empty()) return 0;
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }
  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return dims.size(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.dims != b.dims || a.data.size() != b.data.size()) return false;
    // Bitwise comparison so NaN payloads and -0.0 round-trip checks are exact.
    return a.data.empty() ||
           std::memcmp(a.data.data(), b.data.data(),
                       a.data.size() * sizeof(float)) == 0;
  }
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos + i]} << (8 * i);
  return v;
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t pos) {
  return static_cast<std::uint16_t>(in[pos] | (in[pos + 1] << 8));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(what + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

constexpr char kTensorMagic[4] = {'L', 'C', 'T', '1'};

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.empty() || Tensor::element_count(t.dims) == 0 || t.data.empty())
    throw FormatError("empty tensor");
  if (Tensor::element_count(t.dims) != t.data.size())
    throw FormatError("dims: product of dims does not match data length");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.dims.size() + 4 * t.data.size());
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u32(out, d);
  for (float v : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    throw FormatError("magic: expected \"LCT1\"");
  if (bytes.size() < 8) throw FormatError("rank: missing");
  const std::uint32_t rank = detail::get_u32(bytes, 4);
  if (rank == 0) throw FormatError("rank: must be >= 1");
  // Guard against absurd ranks before multiplying.
  if (rank > (bytes.size() - 8) / 4) throw FormatError("dims: truncated");
  Tensor t;
  t.dims.resize(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims[i] = detail::get_u32(bytes, 8 + 4 * i);
    if (t.dims[i] == 0) throw FormatError("dims: every dim must be >= 1");
    count *= t.dims[i];
    if (count > bytes.size()) throw FormatError("short data");
  }
  const std::size_t offset = 8 + 4 * std::size_t{rank};
  if (bytes.size() - offset < 4 * count) throw FormatError("short data");
  if (bytes.size() - offset > 4 * count)
    throw FormatError("data: trailing bytes after payload");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    t.data[i] = std::bit_cast<float>(detail::get_u32(bytes, offset + 4 * i));
  return t;
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  detail::write_file(path, encode_tensor(t));
}

// ---------------------------------------------------------------------------
// CurveFile

struct CurvePoint {
  double rate = 0.0;
  double quality = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// Parses "rate,quality" CSV rows. Does not require sorted rates; use
// parse_curve for that.
inline std::vector<CurvePoint> parse_points(std::string_view text,
                                            const std::string& name = "curve") {
  std::vector<CurvePoint> pts;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "rate,quality")
        throw FormatError(name + ": header must be 'rate,quality'");
      header_seen = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw FormatError(name + ":" + std::to_string(lineno) + ": expected two columns");
    const std::string where = name + ":" + std::to_string(lineno);
    CurvePoint p{detail::parse_double(std::string_view(line).substr(0, comma), where),
                 detail::parse_double(std::string_view(line).substr(comma + 1), where)};
    if (!std::isfinite(p.rate) || !std::isfinite(p.quality))
      throw FormatError(where + ": non-finite value");
    pts.push_back(p);
  }
  if (!header_seen) throw FormatError(name + ": header must be 'rate,quality'");
  return pts;
}

inline void check_curve(std::span<const CurvePoint> pts, const std::string& name = "curve") {
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].rate > pts[i - 1].rate))
      throw FormatError(name + ": rate column must be strictly increasing (row " +
                        std::to_string(i + 1) + ")");
}

inline std::vector<CurvePoint> parse_curve(std::string_view text,
                                           const std::string& name = "curve") {
  auto pts = parse_points(text, name);
  check_curve(pts, name);
  return pts;
}

inline std::string format_curve(std::span<const CurvePoint> pts) {
  check_curve(pts);
  std::string out = "rate,quality\n";
  for (const auto& p : pts)
    out += detail::format_double(p.rate) + "," + detail::format_double(p.quality) + "\n";
  return out;
}

inline std::vector<CurvePoint> read_points(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  return parse_points(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                       bytes.size()),
                      path.string());
}

inline std::vector<CurvePoint> read_curve(const std::filesystem::path& path) {
  auto pts = read_points(path);
  check_curve(pts, path.string());
  return pts;
}

inline void write_curve(std::span<const CurvePoint> pts,
                        const std::filesystem::path& path) {
  const std::string text = format_curve(pts);
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                     text.size()));
}

}  // namespace lcomp
