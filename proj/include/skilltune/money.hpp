// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace skilltune {

/// Exact USD amount stored as an integer count of 1e-12 USD.
///
/// Prices are quoted per million tokens with at most six decimals, so
/// tokens * price is always an integral number of pico-dollars and sums
/// never accumulate rounding error.
class Money {
 public:
  static constexpr std::int64_t kUnitsPerUsd = 1'000'000'000'000;

  constexpr Money() = default;
  static constexpr Money from_units(std::int64_t units) { return Money(units); }

  /// Parses "3", "0.25", "-1.5"; at most 12 fractional digits.
  static Money parse(std::string_view text);

  constexpr std::int64_t units() const { return units_; }
  double to_double() const { return static_cast<double>(units_) / kUnitsPerUsd; }

  /// Shortest exact decimal with at least two fractional digits: "3.00", "0.000125".
  std::string to_string() const;

  constexpr Money& operator+=(Money other) {
    units_ += other.units_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return Money(a.units_ + b.units_); }
  friend constexpr Money operator-(Money a, Money b) { return Money(a.units_ - b.units_); }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t units) : units_(units) {}
  std::int64_t units_ = 0;
};

}  // namespace skilltune
