#pragma once

// Random subspace plans in which every attribute takes part in exactly the
// same number of subspaces and no subspace repeats.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rsmm/error.hpp"
#include "rsmm/random.hpp"

namespace rsmm {

using Subspace = std::vector<std::size_t>;

struct SubspacePlan {
  std::size_t n = 0;  ///< encoded attribute count
  std::size_t k = 0;  ///< subspace dimension
  std::vector<Subspace> subspaces;  ///< each sorted ascending

  std::size_t m() const { return subspaces.size(); }
  /// Number of subspaces each attribute belongs to.
  std::size_t representation() const { return n == 0 ? 0 : m() * k / n; }

  bool operator==(const SubspacePlan&) const = default;
};

/// Smallest admissible subspace count for (n, k): LCM(k, n) / k.
inline std::size_t subspace_count_step(std::size_t n, std::size_t k) {
  if (k == 0) throw ConfigError("subspace dimension k must be >= 1");
  if (k > n) throw ConfigError("subspace dimension k=" + std::to_string(k) + " exceeds attribute count n=" +
                               std::to_string(n));
  return std::lcm(k, n) / k;
}

/// Admissible subspace count nearest to `m_requested`; ties round up.
inline std::size_t resolve_subspace_count(std::size_t n, std::size_t k, std::size_t m_requested) {
  const std::size_t step = subspace_count_step(n, k);
  if (m_requested == 0) throw ConfigError("requested subspace count must be >= 1");
  const std::size_t below = (m_requested / step) * step;
  if (below == m_requested) return m_requested;
  const std::size_t above = below + step;
  if (below == 0) return above;
  return (m_requested - below < above - m_requested) ? below : above;
}

/// C(n, k), saturating at SIZE_MAX.
inline std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t num = n - k + i;
    const std::size_t g = std::gcd(result, i);
    const std::size_t r = result / g;
    const std::size_t num_div = num / (i / g);
    if (r > std::numeric_limits<std::size_t>::max() / num_div) return std::numeric_limits<std::size_t>::max();
    result = r * num_div;
  }
  return result;
}

namespace detail {

using Chunks = std::vector<Subspace>;

inline bool contains(const Subspace& s, std::size_t v) { return std::find(s.begin(), s.end(), v) != s.end(); }

inline Subspace sorted_copy(Subspace s) {
  std::sort(s.begin(), s.end());
  return s;
}

/// Swaps repeated indices out of each chunk until every chunk has k distinct
/// entries. Swaps only pair positions that leave both chunks duplicate-free.
inline bool repair_repeats(Chunks& chunks, Rng& rng, std::size_t attempts) {
  const std::size_t m = chunks.size();
  const std::size_t k = chunks.front().size();
  std::uniform_int_distribution<std::size_t> pick_chunk(0, m - 1);
  std::uniform_int_distribution<std::size_t> pick_pos(0, k - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const std::size_t v = chunks[i][p];
      bool repeated = false;
      for (std::size_t q = 0; q < p; ++q) repeated = repeated || chunks[i][q] == v;
      if (!repeated) continue;
      bool fixed = false;
      for (std::size_t a = 0; a < attempts && !fixed; ++a) {
        const std::size_t j = pick_chunk(rng);
        if (j == i) continue;
        const std::size_t q = pick_pos(rng);
        const std::size_t u = chunks[j][q];
        if (u == v || contains(chunks[i], u) || contains(chunks[j], v)) continue;
        std::swap(chunks[i][p], chunks[j][q]);
        fixed = true;
      }
      if (!fixed) return false;
    }
  }
  return true;
}

/// Breaks up identical chunks by swapping single entries between chunks,
/// keeping every chunk duplicate-free and never creating a new collision.
inline bool repair_collisions(Chunks& chunks, Rng& rng, std::size_t attempts) {
  const std::size_t m = chunks.size();
  const std::size_t k = chunks.front().size();
  std::uniform_int_distribution<std::size_t> pick_chunk(0, m - 1);
  std::uniform_int_distribution<std::size_t> pick_pos(0, k - 1);
  std::multiset<Subspace> seen;
  for (const auto& c : chunks) seen.insert(sorted_copy(c));
  for (std::size_t i = 0; i < m; ++i) {
    if (seen.count(sorted_copy(chunks[i])) < 2) continue;
    bool fixed = false;
    for (std::size_t a = 0; a < attempts && !fixed; ++a) {
      const std::size_t j = pick_chunk(rng);
      if (j == i) continue;
      const std::size_t p = pick_pos(rng);
      const std::size_t q = pick_pos(rng);
      const std::size_t v = chunks[i][p];
      const std::size_t u = chunks[j][q];
      if (u == v || contains(chunks[i], u) || contains(chunks[j], v)) continue;
      Subspace ci = chunks[i];
      Subspace cj = chunks[j];
      ci[p] = u;
      cj[q] = v;
      const Subspace si = sorted_copy(ci);
      const Subspace sj = sorted_copy(cj);
      if (si == sj) continue;
      const Subspace old_i = sorted_copy(chunks[i]);
      const Subspace old_j = sorted_copy(chunks[j]);
      seen.erase(seen.find(old_i));
      seen.erase(seen.find(old_j));
      if (seen.count(si) > 0 || seen.count(sj) > 0) {
        seen.insert(old_i);
        seen.insert(old_j);
        continue;
      }
      seen.insert(si);
      seen.insert(sj);
      chunks[i] = std::move(ci);
      chunks[j] = std::move(cj);
      fixed = true;
    }
    if (!fixed) return false;
  }
  return true;
}

/// Random plan by shuffling n·r index copies into m chunks and repairing.
inline std::optional<Chunks> shuffled_plan(std::size_t n, std::size_t k, std::size_t m, Rng& rng,
                                           std::size_t max_retries) {
  const std::size_t r = m * k / n;
  std::vector<std::size_t> pool;
  pool.reserve(n * r);
  for (std::size_t a = 0; a < n; ++a) pool.insert(pool.end(), r, a);
  const std::size_t attempts = 50 * (m + 10);
  for (std::size_t retry = 0; retry < max_retries; ++retry) {
    std::shuffle(pool.begin(), pool.end(), rng);
    Chunks chunks(m);
    for (std::size_t i = 0; i < m; ++i) chunks[i].assign(pool.begin() + static_cast<std::ptrdiff_t>(i * k),
                                                         pool.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    if (!repair_repeats(chunks, rng, attempts)) continue;
    if (!repair_collisions(chunks, rng, attempts)) continue;
    return chunks;
  }
  return std::nullopt;
}

/// Every k-subset of [0, n) in lexicographic order.
inline Chunks all_subsets(std::size_t n, std::size_t k) {
  Chunks out;
  Subspace cur(k);
  std::iota(cur.begin(), cur.end(), std::size_t{0});
  for (;;) {
    out.push_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

}  // namespace detail

/// Exhaustive enumeration is used for the complement trick up to this many
/// candidate subsets.
inline constexpr std::size_t kMaxEnumeratedSubsets = 200000;

/// Draws m distinct k-subsets of [0, n) such that every index appears in
/// exactly m·k/n of them. Deterministic given `rng`'s state.
///
/// When more than half of all C(n, k) subsets are requested, the plan is
/// drawn as the complement of a sparser equal-representation plan.
inline SubspacePlan generate_plan(std::size_t n, std::size_t k, std::size_t m, Rng& rng,
                                  std::size_t max_retries = 1000) {
  const std::size_t step = subspace_count_step(n, k);
  if (m == 0 || m % step != 0)
    throw ConfigError("subspace count m=" + std::to_string(m) + " is not a multiple of LCM(k,n)/k=" +
                      std::to_string(step));
  const std::size_t total = binomial(n, k);
  if (m > total)
    throw ConfigError("infeasible plan: m=" + std::to_string(m) + " distinct subspaces requested but only C(" +
                      std::to_string(n) + "," + std::to_string(k) + ")=" + std::to_string(total) + " exist");

  SubspacePlan plan{n, k, {}};
  if (total <= kMaxEnumeratedSubsets && 2 * m > total) {
    detail::Chunks all = detail::all_subsets(n, k);
    std::set<Subspace> excluded;
    if (m < total) {
      auto drop = detail::shuffled_plan(n, k, total - m, rng, max_retries);
      if (!drop)
        throw NumericalError("could not draw an equal-representation plan (n=" + std::to_string(n) + ", k=" +
                             std::to_string(k) + ", m=" + std::to_string(m) + ") after " +
                             std::to_string(max_retries) + " restarts");
      for (auto& c : *drop) excluded.insert(detail::sorted_copy(std::move(c)));
    }
    for (auto& c : all)
      if (!excluded.count(c)) plan.subspaces.push_back(std::move(c));
    std::shuffle(plan.subspaces.begin(), plan.subspaces.end(), rng);
    return plan;
  }

  auto chunks = detail::shuffled_plan(n, k, m, rng, max_retries);
  if (!chunks)
    throw NumericalError("could not draw an equal-representation plan (n=" + std::to_string(n) + ", k=" +
                         std::to_string(k) + ", m=" + std::to_string(m) + ") after " + std::to_string(max_retries) +
                         " restarts");
  for (auto& c : *chunks) plan.subspaces.push_back(detail::sorted_copy(std::move(c)));
  return plan;
}

/// Checks both plan invariants; returns an empty string when the plan is
/// valid, otherwise a description of the first violation.
inline std::string validate_plan(const SubspacePlan& plan) {
  if (plan.k == 0 || plan.k > plan.n) return "k out of range";
  if (plan.m() == 0) return "empty plan";
  if ((plan.m() * plan.k) % plan.n != 0) return "m·k is not a multiple of n";
  std::vector<std::size_t> counts(plan.n, 0);
  std::set<Subspace> distinct;
  for (const auto& s : plan.subspaces) {
    if (s.size() != plan.k) return "subspace with wrong dimension";
    if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end())
      return "subspace not strictly increasing";
    for (auto a : s) {
      if (a >= plan.n) return "attribute index out of range";
      ++counts[a];
    }
    distinct.insert(s);
  }
  if (distinct.size() != plan.m()) return "duplicate subspaces";
  const std::size_t r = plan.representation();
  for (std::size_t a = 0; a < plan.n; ++a)
    if (counts[a] != r)
      return "attribute " + std::to_string(a) + " appears " + std::to_string(counts[a]) + " times, expected " +
             std::to_string(r);
  return {};
}

}  // namespace rsmm
