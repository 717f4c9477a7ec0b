#include "doctest.h"

#include <cmath>

#include "core/rng.hpp"
#include "fidelity/alignment.hpp"
#include "fidelity/stats.hpp"
#include "oracles/alignment_oracle.hpp"
#include "oracles/stats_oracle.hpp"

using namespace dtwin;
using fidelity::AlignmentConfig;
using fidelity::align_similarity_categorical;
using fidelity::align_similarity_numeric;
using fidelity::fisher_exact;
using fidelity::wilcoxon_signed_rank;

TEST_CASE("identical categorical traces align at 100%") {
  const std::vector<int> t{200, 200, 503, 200, 503};
  CHECK(align_similarity_categorical(t, t) == doctest::Approx(100.0));
}

TEST_CASE("numeric traces within tolerance align at 100%") {
  const std::vector<std::int64_t> a{2000, 2500, 3000};
  const std::vector<std::int64_t> b{2400, 2900, 3400};
  CHECK(align_similarity_numeric(a, b) == doctest::Approx(100.0));
}

TEST_CASE("one status flip in four costs a quarter") {
  const std::vector<int> a{200, 200, 503, 200};
  const std::vector<int> b{200, 200, 200, 200};
  CHECK(align_similarity_categorical(a, b) == doctest::Approx(75.0));
}

TEST_CASE("alignment rejects empty traces and bad configs") {
  const std::vector<int> a{200};
  const std::vector<int> empty;
  CHECK_THROWS_AS(align_similarity_categorical(a, empty, {}), DtError);
  AlignmentConfig bad;
  bad.match_score = -1.0;
  bad.mismatch_penalty = -1.0;
  CHECK_THROWS_AS(align_similarity_categorical(a, a, bad), DtError);
  AlignmentConfig negative_tol;
  negative_tol.tolerance_ms = -1;
  CHECK_THROWS_AS(align_similarity_categorical(a, a, negative_tol), DtError);
}

TEST_CASE("alignment is symmetric and bounded by 100") {
  Rng rng(101);
  for (int round = 0; round < 300; ++round) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 12));
    std::vector<int> a(n), b(m);
    for (auto& x : a) x = rng.uniform_int(0, 1) ? 200 : 503;
    for (auto& x : b) x = rng.uniform_int(0, 1) ? 200 : 503;
    const double ab = align_similarity_categorical(a, b);
    const double ba = align_similarity_categorical(b, a);
    CHECK(ab == doctest::Approx(ba));
    CHECK(ab <= 100.0 + 1e-9);
    const bool full = ab >= 100.0 - 1e-9;
    CHECK(full == (n == m && oracle::similarity_categorical(a, b) == 100.0));
  }
}

TEST_CASE("DP similarity equals the exhaustive alignment maximum (small sizes)") {
  // all categorical pairs up to length 5 over {200, 503}
  for (std::size_t la = 1; la <= 5; ++la) {
    for (std::size_t lb = 1; lb <= 5; ++lb) {
      for (std::uint32_t ma = 0; ma < (1u << la); ++ma) {
        for (std::uint32_t mb = 0; mb < (1u << lb); ++mb) {
          std::vector<int> a(la), b(lb);
          for (std::size_t i = 0; i < la; ++i) a[i] = (ma >> i) & 1 ? 503 : 200;
          for (std::size_t i = 0; i < lb; ++i) b[i] = (mb >> i) & 1 ? 503 : 200;
          const double got = align_similarity_categorical(a, b);
          const double want = oracle::similarity_categorical(a, b);
          REQUIRE(got == doctest::Approx(want));
        }
      }
    }
  }
}

TEST_CASE("memoized oracle agrees with plain enumeration (oracle self-check)") {
  Rng rng(7);
  auto eq = [](int x, int y) { return x == y; };
  for (int round = 0; round < 200; ++round) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 4));
    std::vector<int> a(n), b(m);
    for (auto& x : a) x = static_cast<int>(rng.uniform_int(0, 2));
    for (auto& x : b) x = static_cast<int>(rng.uniform_int(0, 2));
    CHECK(oracle::max_matches_memo(a, b, eq) == oracle::max_matches_enumerate(a, b, eq));
  }
}

TEST_CASE("corrupting k matched elements degrades similarity by exactly 100k/len") {
  Rng rng(55);
  for (int round = 0; round < 120; ++round) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, 20));
    std::vector<std::int64_t> a(len);
    for (auto& x : a) x = rng.uniform_int(2000, 4000);
    std::vector<std::int64_t> b = a;
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(len)));
    // replacement values sit far outside tolerance of every element of a
    for (std::size_t i = 0; i < k; ++i) b[i] = 1'000'000 + rng.uniform_int(0, 50);
    AlignmentConfig cfg;  // tolerance 1000
    const double got = align_similarity_numeric(a, b, cfg);
    const double expected = 100.0 * static_cast<double>(len - k) / static_cast<double>(len);
    CHECK(got == doctest::Approx(expected));
    CHECK(got == doctest::Approx(oracle::similarity_numeric(a, b, cfg.tolerance_ms)));
  }
}

TEST_CASE("numeric DP agrees with the oracle on random short pairs") {
  Rng rng(91);
  for (int round = 0; round < 500; ++round) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 8));
    std::vector<std::int64_t> a(n), b(m);
    for (auto& x : a) x = rng.uniform_int(0, 5000);
    for (auto& x : b) x = rng.uniform_int(0, 5000);
    CHECK(align_similarity_numeric(a, b) ==
          doctest::Approx(oracle::similarity_numeric(a, b, 1000)));
  }
}

// --- Wilcoxon ---------------------------------------------------------------

TEST_CASE("wilcoxon on identical samples is 1.0") {
  const std::vector<double> a{2400, 2500, 2600, 2700, 2800, 2900};
  CHECK(wilcoxon_signed_rank(a, a).p_value == doctest::Approx(1.0));
}

TEST_CASE("wilcoxon n=6 with one dissenting sign matches the 2^6 enumeration") {
  const std::vector<double> a{1, 2, 3, 4, 5, 0};
  const std::vector<double> b{0, 0, 0, 0, 0, 6};
  const auto result = wilcoxon_signed_rank(a, b);
  CHECK(result.exact);
  CHECK(result.p_value == doctest::Approx(0.4375).epsilon(1e-12));
  CHECK(result.p_value ==
        doctest::Approx(oracle::wilcoxon_two_sided(a, b)).epsilon(1e-12));
}

TEST_CASE("wilcoxon rejects tiny samples") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{0, 0, 0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, b), DtError);
}

TEST_CASE("wilcoxon exact path matches enumeration on random cases with ties") {
  Rng rng(1234);
  for (int round = 0; round < 200; ++round) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(5, 12));
    std::vector<double> a(n), b(n, 0.0);
    for (auto& x : a) {
      x = static_cast<double>(rng.uniform_int(-6, 6));  // small values force ties and zeros
    }
    std::size_t nonzero = 0;
    for (const double x : a) {
      if (x != 0.0) ++nonzero;
    }
    if (nonzero < 5) continue;
    const double got = wilcoxon_signed_rank(a, b).p_value;
    const double want = oracle::wilcoxon_two_sided(a, b);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon large-n approximation is sane under symmetry") {
  Rng rng(777);
  const std::size_t n = 500;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<double>(rng.uniform_int(2400, 3000));
    b[i] = static_cast<double>(rng.uniform_int(2400, 3000));
  }
  const auto result = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(result.exact);
  CHECK(result.p_value > 0.01);
  CHECK(result.p_value <= 1.0);
}

// --- Fisher ----------------------------------------------------------------------

TEST_CASE("fisher on a symmetric table is 1.0") {
  CHECK(fisher_exact({{{10, 10}, {10, 10}}}).p_value == doctest::Approx(1.0));
}

TEST_CASE("fisher classic table reproduces the enumeration value") {
  const auto result = fisher_exact({{{1, 9}, {11, 3}}});
  // 7462 / 2704156, from the hypergeometric enumeration
  CHECK(result.p_value == doctest::Approx(0.00275945).epsilon(1e-4));
  CHECK(result.p_value == doctest::Approx(oracle::fisher_two_sided(1, 9, 11, 3)).epsilon(1e-12));
}

TEST_CASE("fisher degenerate margins flag p = 1") {
  const auto result = fisher_exact({{{0, 0}, {5, 7}}});
  CHECK(result.degenerate);
  CHECK(result.p_value == doctest::Approx(1.0));
}

TEST_CASE("fisher rejects negative counts") {
  CHECK_THROWS_AS(fisher_exact({{{-1, 2}, {3, 4}}}), DtError);
}

TEST_CASE("fisher matches the exact-rational oracle on random small tables") {
  Rng rng(4321);
  for (int round = 0; round < 400; ++round) {
    const std::int64_t a = rng.uniform_int(0, 8);
    const std::int64_t b = rng.uniform_int(0, 8);
    const std::int64_t c = rng.uniform_int(0, 8);
    const std::int64_t d = rng.uniform_int(0, 8);
    const auto got = fisher_exact({{{a, b}, {c, d}}});
    const double want = oracle::fisher_two_sided(a, b, c, d);
    CHECK(std::fabs(got.p_value - want) <= 1e-12);
  }
}
