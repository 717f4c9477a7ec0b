// Test-only enumeration oracles for the statistical tests.
//
// Wilcoxon: explicit enumeration over all 2^n sign assignments of the ranked
// absolute differences (average ranks for ties, zeros dropped beforehand),
// two-sided p = 2 * min(P(W <= w), P(W >= w)) capped at 1.
//
// Fisher: hypergeometric enumeration with exact integer binomials; table
// probabilities are compared as integer numerators over the common
// denominator C(n, c1), so tie handling is exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline double wilcoxon_two_sided(std::vector<double> a, std::vector<double> b) {
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  if (n == 0) return 1.0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(diffs[x]) < std::fabs(diffs[y]);
  });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }

  double w_obs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0) w_obs += rank[i];
  }

  const std::uint64_t total = 1ULL << n;
  std::uint64_t at_most = 0, at_least = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1ULL << i)) w += rank[i];
    }
    if (w <= w_obs + 1e-9) ++at_most;
    if (w >= w_obs - 1e-9) ++at_least;
  }
  const double p = 2.0 * static_cast<double>(std::min(at_most, at_least)) /
                   static_cast<double>(total);
  return std::min(1.0, p);
}

inline double fisher_two_sided(std::int64_t a, std::int64_t b, std::int64_t c,
                               std::int64_t d) {
  const std::int64_t r1 = a + b, r2 = c + d, c1 = a + c;
  if (r1 == 0 || r2 == 0 || c1 == 0 || b + d == 0) return 1.0;
  const std::int64_t n = r1 + r2;

  // Pascal's triangle up to n
  std::vector<std::vector<std::int64_t>> C(static_cast<std::size_t>(n + 1));
  for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i) {
    C[i].assign(i + 1, 1);
    for (std::size_t k = 1; k < i; ++k) C[i][k] = C[i - 1][k - 1] + C[i - 1][k];
  }
  auto choose = [&](std::int64_t nn, std::int64_t kk) -> std::int64_t {
    if (kk < 0 || kk > nn) return 0;
    return C[static_cast<std::size_t>(nn)][static_cast<std::size_t>(kk)];
  };

  const std::int64_t k_min = std::max<std::int64_t>(0, c1 - r2);
  const std::int64_t k_max = std::min(r1, c1);
  const __int128 num_obs =
      static_cast<__int128>(choose(r1, a)) * choose(r2, c1 - a);
  __int128 num_sum = 0;
  for (std::int64_t k = k_min; k <= k_max; ++k) {
    const __int128 num = static_cast<__int128>(choose(r1, k)) * choose(r2, c1 - k);
    if (num <= num_obs) num_sum += num;
  }
  const double denom = static_cast<double>(choose(n, c1));
  return static_cast<double>(num_sum) / denom;
}

}  // namespace oracle
