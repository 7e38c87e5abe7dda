#include <gtest/gtest.h>

#include <set>

#include "rsmm/subspace.hpp"

namespace rsmm {
namespace {

std::size_t lcm_oracle(std::size_t a, std::size_t b) {
  for (std::size_t v = std::max(a, b);; ++v)
    if (v % a == 0 && v % b == 0) return v;
}

std::size_t binomial_oracle(std::size_t n, std::size_t k) {
  // Pascal's triangle.
  std::vector<std::vector<std::size_t>> c(n + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) {
    c[i][0] = 1;
    for (std::size_t j = 1; j <= i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
  }
  return c[n][k];
}

TEST(SubspaceCount, ResolvesToNearestMultiple) {
  EXPECT_EQ(subspace_count_step(20, 6), 10u);
  EXPECT_EQ(resolve_subspace_count(20, 6, 12), 10u);
  EXPECT_EQ(resolve_subspace_count(118, 4, 59), 59u);
  EXPECT_EQ(resolve_subspace_count(8, 2, 24), 24u);
  EXPECT_EQ(resolve_subspace_count(20, 6, 15), 20u);  // tie rounds up
  EXPECT_EQ(resolve_subspace_count(20, 6, 1), 10u);
  EXPECT_EQ(resolve_subspace_count(7, 7, 3), 3u);
}

TEST(SubspaceCount, StepMatchesOracle) {
  for (std::size_t n = 1; n <= 30; ++n)
    for (std::size_t k = 1; k <= n; ++k) {
      const std::size_t step = subspace_count_step(n, k);
      EXPECT_EQ(step, lcm_oracle(n, k) / k);
      EXPECT_EQ((step * k) % n, 0u);
      for (std::size_t m = 1; m <= 40; ++m) {
        const std::size_t r = resolve_subspace_count(n, k, m);
        EXPECT_EQ(r % step, 0u);
        const auto dist = [&](std::size_t v) { return v > m ? v - m : m - v; };
        for (std::size_t c = step; c <= 2 * (m + step); c += step) EXPECT_LE(dist(r), dist(c));
      }
    }
}

TEST(SubspaceCount, RejectsBadArguments) {
  EXPECT_THROW(subspace_count_step(3, 0), ConfigError);
  EXPECT_THROW(subspace_count_step(3, 4), ConfigError);
  EXPECT_THROW(resolve_subspace_count(4, 2, 0), ConfigError);
}

TEST(Binomial, MatchesPascalTriangle) {
  for (std::size_t n = 0; n <= 40; ++n)
    for (std::size_t k = 0; k <= n; ++k) EXPECT_EQ(binomial(n, k), binomial_oracle(n, k)) << n << " " << k;
  EXPECT_EQ(binomial(3, 5), 0u);
  EXPECT_EQ(binomial(200, 100), std::numeric_limits<std::size_t>::max());
}

TEST(GeneratePlan, SmallestCases) {
  Rng rng(1);
  const auto single = generate_plan(2, 2, 1, rng);
  EXPECT_EQ(single.subspaces, (std::vector<Subspace>{{0, 1}}));

  const auto all = generate_plan(3, 2, 3, rng);
  EXPECT_EQ(std::set<Subspace>(all.subspaces.begin(), all.subspaces.end()),
            (std::set<Subspace>{{0, 1}, {0, 2}, {1, 2}}));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    const auto matching = generate_plan(4, 2, 2, r);
    EXPECT_EQ(validate_plan(matching), "");
    std::set<std::size_t> covered;
    for (const auto& s : matching.subspaces) covered.insert(s.begin(), s.end());
    EXPECT_EQ(covered.size(), 4u);
  }
}

TEST(GeneratePlan, InvariantsHoldAcrossShapes) {
  for (std::size_t n = 2; n <= 14; ++n)
    for (std::size_t k = 1; k <= std::min<std::size_t>(n, 5); ++k) {
      const std::size_t step = subspace_count_step(n, k);
      const std::size_t total = binomial(n, k);
      for (std::size_t m = step; m <= std::min(total, 6 * step); m += step) {
        Rng rng(n * 1000 + k * 100 + m);
        const auto plan = generate_plan(n, k, m, rng);
        ASSERT_EQ(validate_plan(plan), "") << "n=" << n << " k=" << k << " m=" << m;
        EXPECT_EQ(plan.m(), m);
        EXPECT_EQ(plan.representation(), m * k / n);
      }
    }
}

TEST(GeneratePlan, DenseRequestsUseComplement) {
  Rng rng(9);
  const std::size_t total = binomial(8, 3);  // 56
  const std::size_t step = subspace_count_step(8, 3);
  for (std::size_t m = total - step; m <= total; m += step) {
    const auto plan = generate_plan(8, 3, m, rng);
    EXPECT_EQ(validate_plan(plan), "") << m;
  }
}

TEST(GeneratePlan, DeterministicAndSeedSensitive) {
  std::set<std::vector<Subspace>> distinct;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng a(seed), b(seed);
    const auto pa = generate_plan(20, 2, 60, a);
    const auto pb = generate_plan(20, 2, 60, b);
    ASSERT_EQ(pa, pb);
    distinct.insert(pa.subspaces);
  }
  EXPECT_GE(distinct.size(), 95u);
}

TEST(GeneratePlan, RejectsInfeasibleRequests) {
  Rng rng(0);
  EXPECT_THROW(generate_plan(4, 2, 8, rng), ConfigError);   // C(4,2) = 6
  EXPECT_THROW(generate_plan(20, 6, 12, rng), ConfigError);  // not a multiple of 10
  EXPECT_THROW(generate_plan(4, 5, 1, rng), ConfigError);
  EXPECT_THROW(generate_plan(4, 2, 0, rng), ConfigError);
}

TEST(ValidatePlan, DetectsViolations) {
  EXPECT_EQ(validate_plan({4, 2, {{0, 1}, {2, 3}}}), "");
  EXPECT_NE(validate_plan({4, 2, {{0, 1}, {0, 1}}}), "");
  EXPECT_NE(validate_plan({4, 2, {{0, 1}, {1, 2}}}), "");
  EXPECT_NE(validate_plan({4, 2, {{1, 0}, {2, 3}}}), "");
  EXPECT_NE(validate_plan({4, 2, {{0, 1}, {2, 4}}}), "");
  EXPECT_NE(validate_plan({4, 2, {}}), "");
}

}  // namespace
}  // namespace rsmm
