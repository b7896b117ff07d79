// Copyright 2026 The cascade-oam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CASCADE_UNITS_HPP
#define CASCADE_UNITS_HPP

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>

#include "cascade/errors.hpp"

namespace cascade {

// CODATA 2018 (exact in SI since 2019 for c and h).
inline constexpr double kSpeedOfLight = 299792458.0;          // m/s
inline constexpr double kPlanck = 6.62607015e-34;              // J s
inline constexpr double kHbar = 1.054571817e-34;               // J s
inline constexpr double kPicosecond = 1e-12;                   // s

/// Photon energy hbar * omega for a vacuum wavelength in meters.
inline double photon_energy(double wavelength) {
  return kHbar * 2.0 * std::numbers::pi * kSpeedOfLight / wavelength;
}

enum class Dimension { kLength, kTime, kPower, kFrequency, kDimensionless };

namespace detail {

struct UnitEntry {
  std::string_view name;
  Dimension dim;
  double scale;
};

inline constexpr UnitEntry kUnits[] = {
    {"m", Dimension::kLength, 1.0},
    {"mm", Dimension::kLength, 1e-3},
    {"um", Dimension::kLength, 1e-6},
    {"\xC2\xB5m", Dimension::kLength, 1e-6},  // µm
    {"nm", Dimension::kLength, 1e-9},
    {"s", Dimension::kTime, 1.0},
    {"ms", Dimension::kTime, 1e-3},
    {"us", Dimension::kTime, 1e-6},
    {"\xC2\xB5s", Dimension::kTime, 1e-6},
    {"ns", Dimension::kTime, 1e-9},
    {"ps", Dimension::kTime, 1e-12},
    {"min", Dimension::kTime, 60.0},
    {"h", Dimension::kTime, 3600.0},
    {"W", Dimension::kPower, 1.0},
    {"mW", Dimension::kPower, 1e-3},
    {"uW", Dimension::kPower, 1e-6},
    {"\xC2\xB5W", Dimension::kPower, 1e-6},
    {"nW", Dimension::kPower, 1e-9},
    {"Hz", Dimension::kFrequency, 1.0},
    {"kHz", Dimension::kFrequency, 1e3},
    {"MHz", Dimension::kFrequency, 1e6},
    {"GHz", Dimension::kFrequency, 1e9},
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses "614 uW", "524.59nm", "0.3 ns" or a bare number into SI units.
/// A bare number is taken to be SI already.
inline double parse_quantity(std::string_view text, Dimension dim) {
  std::string_view s = detail::trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr == s.data()) {
    throw ConfigError("cannot parse quantity '" + std::string(text) + "'");
  }
  std::string_view unit = detail::trim(std::string_view(ptr, s.data() + s.size() - ptr));
  if (unit.empty()) return value;
  for (const auto& u : detail::kUnits) {
    if (u.name == unit) {
      if (u.dim != dim) {
        throw ConfigError("unit '" + std::string(unit) + "' has the wrong dimension in '" +
                          std::string(text) + "'");
      }
      return value * u.scale;
    }
  }
  throw ConfigError("unknown unit '" + std::string(unit) + "' in '" + std::string(text) + "'");
}

}  // namespace cascade

#endif  // CASCADE_UNITS_HPP
