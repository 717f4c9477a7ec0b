// Copyright 2024 The dtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace dtwin {

inline constexpr std::int64_t kMsPerMinute = 60'000;
inline constexpr std::int64_t kMsPerHour = 3'600'000;
inline constexpr std::int64_t kMsPerDay = 86'400'000;

// Civil timestamps are milliseconds since 1970-01-01T00:00:00 on a timezone-
// free calendar. The virtual clock stores an offset against such an epoch.

// "YYYY-MM-DD" -> day count since 1970-01-01. nullopt when malformed.
std::optional<std::int64_t> parse_civil_date(const std::string& text);

// "HH:MM" or "HH:MM:SS" -> milliseconds into the day. nullopt when malformed.
std::optional<std::int64_t> parse_time_of_day(const std::string& text);

// "YYYY-MM-DDTHH:MM[:SS]" -> civil milliseconds. nullopt when malformed.
std::optional<std::int64_t> parse_civil_datetime(const std::string& text);

std::string format_civil_date(std::int64_t days_since_epoch);
std::string format_time_of_day(std::int64_t ms_of_day);
std::string format_civil_datetime(std::int64_t civil_ms);

inline std::int64_t civil_day_of(std::int64_t civil_ms) {
  // floored division; civil_ms may predate 1970 in principle
  std::int64_t day = civil_ms / kMsPerDay;
  if (civil_ms % kMsPerDay < 0) --day;
  return day;
}

inline std::int64_t ms_of_day_of(std::int64_t civil_ms) {
  return civil_ms - civil_day_of(civil_ms) * kMsPerDay;
}

}  // namespace dtwin
