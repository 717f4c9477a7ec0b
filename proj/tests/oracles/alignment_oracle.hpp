// Test-only oracles for global-alignment similarity. Independent of the
// production scoring DP: these implement the recursive definition of
// "maximum matched positions over all global alignments" directly.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

// Memoized recursion straight off the alignment definition: at (i, j) either
// pair a[i] with b[j], or gap one of them.
template <typename T, typename MatchFn>
int max_matches_memo(const std::vector<T>& a, const std::vector<T>& b, MatchFn&& match) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> memo((n + 1) * (m + 1), -1);
  std::function<int(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> int {
    if (i == n || j == m) return 0;
    int& slot = memo[i * (m + 1) + j];
    if (slot >= 0) return slot;
    int best = rec(i + 1, j + 1) + (match(a[i], b[j]) ? 1 : 0);
    best = std::max(best, rec(i + 1, j));
    best = std::max(best, rec(i, j + 1));
    return slot = best;
  };
  return rec(0, 0);
}

// Plain exponential enumeration (no memo); only for tiny inputs. Used to
// cross-check the memoized oracle itself.
template <typename T, typename MatchFn>
int max_matches_enumerate(const std::vector<T>& a, const std::vector<T>& b, MatchFn&& match,
                          std::size_t i = 0, std::size_t j = 0) {
  if (i == a.size() || j == b.size()) return 0;
  int best = max_matches_enumerate(a, b, match, i + 1, j + 1) + (match(a[i], b[j]) ? 1 : 0);
  best = std::max(best, max_matches_enumerate(a, b, match, i + 1, j));
  best = std::max(best, max_matches_enumerate(a, b, match, i, j + 1));
  return best;
}

template <typename T, typename MatchFn>
double similarity_pct(const std::vector<T>& a, const std::vector<T>& b, MatchFn&& match) {
  const int matches = max_matches_memo(a, b, match);
  return 100.0 * 2.0 * matches / static_cast<double>(a.size() + b.size());
}

inline double similarity_numeric(const std::vector<std::int64_t>& a,
                                 const std::vector<std::int64_t>& b,
                                 std::int64_t tolerance) {
  return similarity_pct(a, b, [tolerance](std::int64_t x, std::int64_t y) {
    return (x > y ? x - y : y - x) <= tolerance;
  });
}

inline double similarity_categorical(const std::vector<int>& a, const std::vector<int>& b) {
  return similarity_pct(a, b, [](int x, int y) { return x == y; });
}

}  // namespace oracle
