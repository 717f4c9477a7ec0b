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

#include "fidelity/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace dtwin::fidelity {

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DtError(Errc::invalid_argument, "wilcoxon needs paired samples of equal length");
  }
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  if (n == 0) return {1.0, 0, true};
  if (n < 5) {
    throw DtError(Errc::too_few_pairs,
                  "need at least 5 non-zero differences, got " + std::to_string(n));
  }

  // rank |d| ascending, average ranks for ties
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(diffs[x]) < std::fabs(diffs[y]);
  });
  std::vector<double> rank(n);
  std::vector<std::size_t> tie_sizes;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    tie_sizes.push_back(j - i);
    i = j;
  }

  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0) w_plus += rank[i];
  }

  WilcoxonResult result;
  result.n_effective = n;

  if (n <= 20) {
    // exact null distribution of 2*W+ (doubled ranks are integers even with
    // .5 average ranks) via the rank generating function
    std::vector<std::int64_t> r2(n);
    std::int64_t total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<std::int64_t>(std::llround(2.0 * rank[i]));
      total2 += r2[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto step = static_cast<std::size_t>(r2[i]);
      for (std::size_t s = reach + step + 1; s-- > step;) {
        counts[s] += counts[s - step];
      }
      reach += step;
    }
    const double denom = std::pow(2.0, static_cast<double>(n));
    const auto w2 = static_cast<std::size_t>(std::llround(2.0 * w_plus));
    double below = 0.0, above = 0.0;
    for (std::size_t s = 0; s <= static_cast<std::size_t>(total2); ++s) {
      if (s <= w2) below += counts[s];
      if (s >= w2) above += counts[s];
    }
    result.p_value = std::min(1.0, 2.0 * std::min(below, above) / denom);
    result.exact = true;
    return result;
  }

  const double dn = static_cast<double>(n);
  const double mean = dn * (dn + 1.0) / 4.0;
  double tie_term = 0.0;
  for (const std::size_t t : tie_sizes) {
    const double dt = static_cast<double>(t);
    tie_term += dt * dt * dt - dt;
  }
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
  const double sd = std::sqrt(var);
  const double centered = w_plus - mean;
  const double corrected = centered - (centered > 0 ? 0.5 : centered < 0 ? -0.5 : 0.0);
  const double z = sd > 0 ? corrected / sd : 0.0;
  result.p_value = std::min(1.0, 2.0 * normal_sf(std::fabs(z)));
  result.exact = false;
  return result;
}

FisherResult fisher_exact(const std::array<std::array<std::int64_t, 2>, 2>& table) {
  const std::int64_t a = table[0][0], b = table[0][1], c = table[1][0], d = table[1][1];
  if (a < 0 || b < 0 || c < 0 || d < 0) {
    throw DtError(Errc::invalid_argument, "fisher table counts must not be negative");
  }
  const std::int64_t r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    return {1.0, true};
  }
  const std::int64_t n = r1 + r2;

  auto log_choose = [](std::int64_t nn, std::int64_t kk) {
    return std::lgamma(static_cast<double>(nn + 1)) -
           std::lgamma(static_cast<double>(kk + 1)) -
           std::lgamma(static_cast<double>(nn - kk + 1));
  };
  const double log_denom = log_choose(n, c1);
  auto prob = [&](std::int64_t k) {
    return std::exp(log_choose(r1, k) + log_choose(r2, c1 - k) - log_denom);
  };

  const std::int64_t k_min = std::max<std::int64_t>(0, c1 - r2);
  const std::int64_t k_max = std::min(r1, c1);
  const double p_obs = prob(a);
  const double threshold = p_obs * (1.0 + 1e-7);

  double p = 0.0;
  for (std::int64_t k = k_min; k <= k_max; ++k) {
    const double pk = prob(k);
    if (pk <= threshold) p += pk;
  }
  return {std::min(1.0, p), false};
}

}  // namespace dtwin::fidelity
