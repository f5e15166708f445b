// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/diff.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <unordered_map>

namespace skilltune {

namespace {

constexpr std::size_t kBitParallelThreshold = 32;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

struct Interned {
  std::vector<std::uint32_t> a;
  std::vector<std::uint32_t> b;
};

Interned intern(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
  std::unordered_map<std::string_view, std::uint32_t> ids;
  auto id_of = [&ids](std::string_view tok) {
    auto [it, inserted] = ids.try_emplace(tok, static_cast<std::uint32_t>(ids.size()));
    return it->second;
  };
  Interned out;
  out.a.reserve(a.size());
  out.b.reserve(b.size());
  for (std::string_view t : a) out.a.push_back(id_of(t));
  for (std::string_view t : b) out.b.push_back(id_of(t));
  return out;
}

DiffCounts diff_tokens(const std::vector<std::string_view>& before, const std::vector<std::string_view>& after) {
  Interned ids = intern(before, after);
  std::size_t common = lcs_length(ids.a, ids.b);
  return {after.size() - common, before.size() - common};
}

}  // namespace

std::size_t lcs_length_reference(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::size_t up = row[j + 1];
      row[j + 1] = a[i] == b[j] ? diag + 1 : std::max(up, row[j]);
      diag = up;
    }
  }
  return row[b.size()];
}

// Allison-Dix / Hyyro: V has a zero bit at every row where the LCS column
// count steps up. For each token of b, U = V & match(token); V = (V + U) | (V - U),
// and V - U equals V ^ U because U is a subset of V.
std::size_t lcs_length_bitparallel(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() || b.empty()) return 0;
  const std::size_t words = (a.size() + 63) / 64;
  std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> match;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto& mask = match[a[i]];
    if (mask.empty()) mask.assign(words, 0);
    mask[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  std::vector<std::uint64_t> v(words, ~std::uint64_t{0});
  for (std::uint32_t token : b) {
    auto it = match.find(token);
    if (it == match.end()) continue;
    const std::vector<std::uint64_t>& pm = it->second;
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < words; ++w) {
      const std::uint64_t u = v[w] & pm[w];
      const std::uint64_t s1 = v[w] + u;
      const std::uint64_t s2 = s1 + carry;
      carry = static_cast<std::uint64_t>(s1 < v[w]) | static_cast<std::uint64_t>(s2 < s1);
      v[w] = s2 | (v[w] ^ u);
    }
  }
  std::size_t zeros = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t live = v[w];
    const std::size_t bits = std::min<std::size_t>(64, a.size() - w * 64);
    if (bits < 64) live |= ~std::uint64_t{0} << bits;
    zeros += static_cast<std::size_t>(std::popcount(~live));
  }
  return zeros;
}

std::size_t lcs_length(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  // Common prefix and suffix are always part of some LCS.
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  a = a.subspan(prefix);
  b = b.subspan(prefix);
  std::size_t suffix = 0;
  while (suffix < a.size() && suffix < b.size() && a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) ++suffix;
  a = a.first(a.size() - suffix);
  b = b.first(b.size() - suffix);
  if (a.size() < kBitParallelThreshold && b.size() < kBitParallelThreshold) {
    return prefix + suffix + lcs_length_reference(a, b);
  }
  // Pack the shorter side so the word count is smaller.
  if (b.size() < a.size()) std::swap(a, b);
  return prefix + suffix + lcs_length_bitparallel(a, b);
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines_view(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::vector<std::string_view> split_code_points(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i++;
    while (i < text.size() && (static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) ++i;
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

DiffCounts word_diff(std::string_view before, std::string_view after) {
  return diff_tokens(split_words(before), split_words(after));
}

DiffCounts line_diff(std::string_view before, std::string_view after) {
  return diff_tokens(split_lines_view(before), split_lines_view(after));
}

DiffCounts char_diff(std::string_view before, std::string_view after) {
  return diff_tokens(split_code_points(before), split_code_points(after));
}

}  // namespace skilltune
