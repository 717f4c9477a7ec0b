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

#include "core/civiltime.hpp"

#include <chrono>
#include <cstdio>

namespace dtwin {
namespace {

bool all_digits(const std::string& s, std::size_t from, std::size_t count) {
  if (from + count > s.size()) return false;
  for (std::size_t i = from; i < from + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

int read_int(const std::string& s, std::size_t from, std::size_t count) {
  int v = 0;
  for (std::size_t i = from; i < from + count; ++i) v = v * 10 + (s[i] - '0');
  return v;
}

}  // namespace

std::optional<std::int64_t> parse_civil_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!all_digits(text, 0, 4) || !all_digits(text, 5, 2) || !all_digits(text, 8, 2)) {
    return std::nullopt;
  }
  const int y = read_int(text, 0, 4);
  const unsigned m = static_cast<unsigned>(read_int(text, 5, 2));
  const unsigned d = static_cast<unsigned>(read_int(text, 8, 2));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::optional<std::int64_t> parse_time_of_day(const std::string& text) {
  if (text.size() != 5 && text.size() != 8) return std::nullopt;
  if (text[2] != ':' || !all_digits(text, 0, 2) || !all_digits(text, 3, 2)) {
    return std::nullopt;
  }
  const int h = read_int(text, 0, 2);
  const int m = read_int(text, 3, 2);
  int s = 0;
  if (text.size() == 8) {
    if (text[5] != ':' || !all_digits(text, 6, 2)) return std::nullopt;
    s = read_int(text, 6, 2);
  }
  if (h > 23 || m > 59 || s > 59) return std::nullopt;
  return (static_cast<std::int64_t>(h) * 3600 + m * 60 + s) * 1000;
}

std::optional<std::int64_t> parse_civil_datetime(const std::string& text) {
  if (text.size() < 16 || text[10] != 'T') return std::nullopt;
  const auto day = parse_civil_date(text.substr(0, 10));
  const auto tod = parse_time_of_day(text.substr(11));
  if (!day || !tod) return std::nullopt;
  return *day * kMsPerDay + *tod;
}

std::string format_civil_date(std::int64_t days_since_epoch) {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{days_since_epoch}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_time_of_day(std::int64_t ms_of_day) {
  const std::int64_t total_s = ms_of_day / 1000;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", static_cast<int>(total_s / 3600),
                static_cast<int>((total_s / 60) % 60), static_cast<int>(total_s % 60));
  return buf;
}

std::string format_civil_datetime(std::int64_t civil_ms) {
  return format_civil_date(civil_day_of(civil_ms)) + "T" +
         format_time_of_day(ms_of_day_of(civil_ms));
}

}  // namespace dtwin
