// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/money.hpp"

#include <cctype>

#include "skilltune/error.hpp"

namespace skilltune {

Money Money::parse(std::string_view text) {
  auto fail = [&] { return Error(ErrorKind::kInvalidArgument, "bad money amount '" + std::string(text) + "'"); };
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    negative = text[i] == '-';
    ++i;
  }
  std::int64_t whole = 0;
  std::size_t whole_digits = 0;
  for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i, ++whole_digits) {
    if (whole > 9'000'000) throw fail();
    whole = whole * 10 + (text[i] - '0');
  }
  std::int64_t frac = 0;
  int frac_digits = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      if (++frac_digits > 12) throw fail();
      frac = frac * 10 + (text[i] - '0');
    }
  }
  if (i != text.size() || (whole_digits == 0 && frac_digits == 0)) throw fail();
  for (int d = frac_digits; d < 12; ++d) frac *= 10;
  std::int64_t units = whole * kUnitsPerUsd + frac;
  return Money(negative ? -units : units);
}

std::string Money::to_string() const {
  std::int64_t abs = units_ < 0 ? -units_ : units_;
  std::string frac = std::to_string(abs % kUnitsPerUsd);
  frac.insert(0, 12 - frac.size(), '0');
  while (frac.size() > 2 && frac.back() == '0') frac.pop_back();
  return (units_ < 0 ? "-" : "") + std::to_string(abs / kUnitsPerUsd) + "." + frac;
}

}  // namespace skilltune
