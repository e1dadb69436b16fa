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
// Static-table rANS with a 64-bit state and 32-bit renormalization words.
//
// Stream layout (little-endian):
//   "LCR1" | count:u32 | y_min:i32 | B:u32 | B x freq:u16 | payload:u32 words
//
// A frequency of 65536 (only possible when B == 1) is stored as 0. The payload
// starts with the final encoder state (low word first) followed by the
// renormalization words in the order the decoder consumes them. Symbols are
// encoded last-to-first so they decode first-to-last.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "lcomp/dist.hpp"
#include "lcomp/error.hpp"
#include "lcomp/tensorio.hpp"

namespace lcomp {

inline constexpr unsigned kFrequencyBits = 16;
inline constexpr std::uint32_t kFrequencyTotal = 1u << kFrequencyBits;

class FrequencyTable {
 public:
  FrequencyTable(int y_min, std::vector<std::uint32_t> freqs)
      : support_{y_min, freqs.size()}, freqs_(std::move(freqs)) {
    if (freqs_.empty()) throw ParameterError("frequency table needs at least one bin");
    if (freqs_.size() > kFrequencyTotal)
      throw ParameterError("unsupported support: B = " + std::to_string(freqs_.size()) +
                           " exceeds 65536");
    cum_.resize(freqs_.size() + 1, 0);
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
      if (freqs_[i] == 0)
        throw ParameterError("frequency table: bin " + std::to_string(i) + " has zero frequency");
      cum_[i + 1] = cum_[i] + freqs_[i];
    }
    if (cum_.back() != kFrequencyTotal)
      throw ParameterError("frequency table sums to " + std::to_string(cum_.back()) +
                           ", expected 65536");
  }

  const Support& support() const { return support_; }
  std::size_t bins() const { return freqs_.size(); }
  std::span<const std::uint32_t> frequencies() const { return freqs_; }
  std::uint32_t frequency(std::size_t i) const { return freqs_[i]; }
  std::uint32_t cumulative(std::size_t i) const { return cum_[i]; }

  // Bin whose cumulative range contains `slot` (< 65536).
  std::size_t lookup(std::uint32_t slot) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), slot);
    return static_cast<std::size_t>(it - cum_.begin()) - 1;
  }

  DiscreteDistribution as_distribution() const {
    std::vector<double> m(freqs_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = freqs_[i] / double(kFrequencyTotal);
    return DiscreteDistribution(support_.y_min, std::move(m));
  }

  friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;

 private:
  Support support_;
  std::vector<std::uint32_t> freqs_;
  std::vector<std::uint32_t> cum_;
};

// Largest-remainder rounding of p * 2^16 with every bin forced to >= 1.
// Excess created by the forced minimum is taken back from the bins that lose
// the least code length per unit (largest frequencies first).
inline FrequencyTable quantize_distribution(const DiscreteDistribution& p) {
  const std::size_t n = p.bins();
  if (n > kFrequencyTotal)
    throw ParameterError("unsupported support: B = " + std::to_string(n) + " exceeds 65536");
  std::vector<std::uint32_t> f(n);
  std::vector<double> rem(n);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scaled = p[i] * kFrequencyTotal;
    const double fl = std::floor(scaled);
    f[i] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(fl));
    rem[i] = f[i] > fl ? -1.0 : scaled - fl;  // bumped-up bins never get more
    total += f[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (total < kFrequencyTotal) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; total < kFrequencyTotal; k = (k + 1) % n, ++total) ++f[order[k]];
  } else {
    // Removing one count from bin i costs about p_i / f_i bits per symbol.
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> cheapest;
    for (std::size_t i = 0; i < n; ++i)
      if (f[i] > 1) cheapest.push({p[i] / f[i], i});
    while (total > kFrequencyTotal) {
      const std::size_t i = cheapest.top().second;
      cheapest.pop();
      --f[i];
      --total;
      if (f[i] > 1) cheapest.push({p[i] / f[i], i});
    }
  }
  return FrequencyTable(p.y_min(), std::move(f));
}

// Sum over symbols of -log2(freq / 2^16).
inline double ideal_code_length_bits(std::span<const std::uint32_t> symbols,
                                     const FrequencyTable& table) {
  double bits = 0.0;
  for (auto s : symbols) {
    if (s >= table.bins()) throw ParameterError("symbol out of support");
    bits += kFrequencyBits - std::log2(double(table.frequency(s)));
  }
  return bits;
}

struct BitStream {
  std::uint32_t count = 0;
  FrequencyTable table;
  std::vector<std::uint32_t> payload;

  std::size_t payload_bits() const { return payload.size() * 32; }
};

namespace detail {

inline constexpr std::uint64_t kRansLower = 1ULL << 31;

}  // namespace detail

// `symbols` are bin indices into `table`.
inline BitStream encode(std::span<const std::uint32_t> symbols, const FrequencyTable& table) {
  for (std::size_t k = 0; k < symbols.size(); ++k)
    if (symbols[k] >= table.bins())
      throw ParameterError("symbol " + std::to_string(symbols[k]) + " at index " +
                           std::to_string(k) + " is outside the support of " +
                           std::to_string(table.bins()) + " bins");
  if (symbols.size() > UINT32_MAX) throw ParameterError("too many symbols for one stream");
  BitStream out{static_cast<std::uint32_t>(symbols.size()), table, {}};
  if (symbols.empty()) return out;

  std::vector<std::uint32_t> emitted;
  emitted.reserve(symbols.size() / 16 + 2);
  std::uint64_t x = detail::kRansLower;
  for (std::size_t k = symbols.size(); k-- > 0;) {
    const std::uint64_t freq = table.frequency(symbols[k]);
    const std::uint64_t start = table.cumulative(symbols[k]);
    const std::uint64_t x_max = ((detail::kRansLower >> kFrequencyBits) << 32) * freq;
    if (x >= x_max) {
      emitted.push_back(static_cast<std::uint32_t>(x));
      x >>= 32;
    }
    x = ((x / freq) << kFrequencyBits) + (x % freq) + start;
  }
  out.payload.reserve(emitted.size() + 2);
  out.payload.push_back(static_cast<std::uint32_t>(x));
  out.payload.push_back(static_cast<std::uint32_t>(x >> 32));
  out.payload.insert(out.payload.end(), emitted.rbegin(), emitted.rend());
  return out;
}

inline std::vector<std::uint32_t> decode(const BitStream& stream) {
  std::vector<std::uint32_t> symbols;
  const auto& words = stream.payload;
  if (stream.count == 0) {
    if (!words.empty()) throw FormatError("corrupt payload: data after empty stream");
    return symbols;
  }
  if (words.size() < 2) throw FormatError("truncated payload: missing coder state");
  symbols.reserve(stream.count);
  const auto& table = stream.table;
  std::size_t pos = 2;
  std::uint64_t x = std::uint64_t{words[0]} | (std::uint64_t{words[1]} << 32);
  constexpr std::uint64_t mask = kFrequencyTotal - 1;
  for (std::uint32_t k = 0; k < stream.count; ++k) {
    const auto slot = static_cast<std::uint32_t>(x & mask);
    const std::size_t s = table.lookup(slot);
    symbols.push_back(static_cast<std::uint32_t>(s));
    x = table.frequency(s) * (x >> kFrequencyBits) + slot - table.cumulative(s);
    if (x < detail::kRansLower) {
      if (pos >= words.size()) throw FormatError("truncated payload");
      x = (x << 32) | words[pos++];
    }
  }
  if (pos != words.size() || x != detail::kRansLower)
    throw FormatError("corrupt payload: final coder state mismatch");
  return symbols;
}

constexpr char kStreamMagic[4] = {'L', 'C', 'R', '1'};

inline std::vector<std::uint8_t> serialize(const BitStream& s) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 2 * s.table.bins() + 4 * s.payload.size());
  out.insert(out.end(), kStreamMagic, kStreamMagic + 4);
  detail::put_u32(out, s.count);
  detail::put_u32(out, static_cast<std::uint32_t>(s.table.support().y_min));
  detail::put_u32(out, static_cast<std::uint32_t>(s.table.bins()));
  for (auto f : s.table.frequencies())
    detail::put_u16(out, static_cast<std::uint16_t>(f == kFrequencyTotal ? 0 : f));
  for (auto w : s.payload) detail::put_u32(out, w);
  return out;
}

inline BitStream parse_bitstream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kStreamMagic, 4) != 0)
    throw FormatError("magic: expected \"LCR1\"");
  if (bytes.size() < 16) throw FormatError("header: truncated");
  const std::uint32_t count = detail::get_u32(bytes, 4);
  const auto y_min = static_cast<std::int32_t>(detail::get_u32(bytes, 8));
  const std::uint32_t bins = detail::get_u32(bytes, 12);
  if (bins == 0 || bins > kFrequencyTotal) throw FormatError("header: B out of range");
  if (bytes.size() < 16 + 2 * std::size_t{bins}) throw FormatError("header: truncated table");
  std::vector<std::uint32_t> freqs(bins);
  for (std::uint32_t i = 0; i < bins; ++i) {
    const std::uint16_t f = detail::get_u16(bytes, 16 + 2 * std::size_t{i});
    freqs[i] = f == 0 ? kFrequencyTotal : f;
  }
  const std::size_t offset = 16 + 2 * std::size_t{bins};
  if ((bytes.size() - offset) % 4 != 0) throw FormatError("truncated payload");
  std::vector<std::uint32_t> payload((bytes.size() - offset) / 4);
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = detail::get_u32(bytes, offset + 4 * i);
  try {
    return BitStream{count, FrequencyTable(y_min, std::move(freqs)), std::move(payload)};
  } catch (const ParameterError& e) {
    throw FormatError(std::string("header: ") + e.what());
  }
}

inline void write_bitstream(const BitStream& s, const std::filesystem::path& path) {
  detail::write_file(path, serialize(s));
}

inline BitStream read_bitstream(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  try {
    return parse_bitstream(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace lcomp
