// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace skilltune {

/// Length of the longest common subsequence of two token-id streams.
///
/// Two kernels compute the same value: a row-at-a-time dynamic program and a
/// bit-parallel variant that packs one sequence into 64-bit words and
/// advances a whole DP column per addition. `lcs_length` picks by size.
std::size_t lcs_length_reference(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
std::size_t lcs_length_bitparallel(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
std::size_t lcs_length(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

struct DiffCounts {
  std::size_t added = 0;
  std::size_t removed = 0;

  bool operator==(const DiffCounts&) const = default;
};

/// Tokens that occur in `after` but not in the LCS are added; tokens of
/// `before` outside the LCS are removed.
DiffCounts word_diff(std::string_view before, std::string_view after);
DiffCounts line_diff(std::string_view before, std::string_view after);
DiffCounts char_diff(std::string_view before, std::string_view after);

/// Whitespace-run tokenizer shared with the word metrics.
std::vector<std::string_view> split_words(std::string_view text);
std::vector<std::string_view> split_lines_view(std::string_view text);
std::vector<std::string_view> split_code_points(std::string_view text);

}  // namespace skilltune
