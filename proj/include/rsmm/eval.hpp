#pragma once

// Evaluation protocol: random train/test splits, rank-based ROC-AUC, and
// repeated-trial benchmarks of the ensemble against the full-dimensional
// mixture baseline.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsmm/dataset.hpp"
#include "rsmm/model.hpp"

namespace rsmm {

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

/// Uniformly random partition with round(fraction·s) training rows.
inline Split train_test_split(const Dataset& ds, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  const std::size_t s = ds.rows();
  if (s < 2) throw DataError("need at least 2 rows to split");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(s)));
  if (n_train == 0 || n_train == s)
    throw ConfigError("train fraction " + std::to_string(train_fraction) + " leaves an empty side for " +
                      std::to_string(s) + " rows");
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  Split split;
  split.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  split.train = ds.subset(split.train_rows);
  split.test = ds.subset(split.test_rows);
  return split;
}

/// Area under the ROC curve for scores where larger means more anomalous and
/// label 1 marks anomalies. Mann-Whitney form with average ranks for ties.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
  const std::size_t s = scores.size();
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("roc_auc: labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0 || positives == s) throw DataError("roc_auc needs both classes present");
  for (double v : scores)
    if (std::isnan(v)) throw DataError("roc_auc: NaN score");
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < s;) {
    std::size_t j = i;
    while (j + 1 < s && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1) positive_rank_sum += rank;
    i = j + 1;
  }
  const auto a = static_cast<double>(positives);
  const auto b = static_cast<double>(s - positives);
  return (positive_rank_sum - a * (a + 1.0) / 2.0) / (a * b);
}

enum class Algorithm { rsmm, full_gmm };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::rsmm ? "rsmm" : "full_gmm"; }

inline Algorithm parse_algorithm(std::string_view text) {
  if (text == "rsmm") return Algorithm::rsmm;
  if (text == "full_gmm" || text == "gmm") return Algorithm::full_gmm;
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected rsmm or full_gmm)");
}

/// The configuration an algorithm runs with on `ds`: full_gmm is the single
/// subspace holding every encoded attribute.
inline RsmmConfig algorithm_config(Algorithm algorithm, const RsmmConfig& base, const Dataset& ds) {
  RsmmConfig c = base;
  if (algorithm == Algorithm::full_gmm) {
    c.k = ds.encoded_dim();
    c.m = 1;
  }
  return c;
}

struct TrialResult {
  std::size_t trial = 0;
  double auc = 0.0;
  double seconds = 0.0;
};

struct BenchmarkResult {
  std::string dataset;
  std::string algorithm;
  double train_fraction = 0.0;
  std::vector<TrialResult> trials;
  double mean_auc = 0.0;
  double std_auc = 0.0;  ///< population standard deviation over trials

  void summarize() {
    const auto t = static_cast<double>(trials.size());
    mean_auc = 0.0;
    for (const auto& r : trials) mean_auc += r.auc;
    mean_auc /= t;
    double var = 0.0;
    for (const auto& r : trials) var += (r.auc - mean_auc) * (r.auc - mean_auc);
    std_auc = std::sqrt(var / t);
  }
};

struct BenchmarkOptions {
  std::string dataset_name = "dataset";
  std::vector<Algorithm> algorithms{Algorithm::rsmm, Algorithm::full_gmm};
  std::size_t trials = 10;
  double train_fraction = 0.6;
  std::uint64_t seed = 0;
};

/// Trial t splits with seed+t, fits each algorithm on the training rows only
/// (labels unused) with the same seed, and scores the test rows.
inline std::vector<BenchmarkResult> run_benchmark(const Dataset& ds, const RsmmConfig& config,
                                                  const BenchmarkOptions& options) {
  if (!ds.labels) throw DataError("benchmark needs a labeled dataset");
  if (options.trials == 0) throw ConfigError("trials must be >= 1");
  if (options.algorithms.empty()) throw ConfigError("no algorithms selected");
  std::vector<BenchmarkResult> results;
  for (auto a : options.algorithms)
    results.push_back({options.dataset_name, std::string(to_string(a)), options.train_fraction, {}, 0.0, 0.0});
  for (std::size_t t = 0; t < options.trials; ++t) {
    const std::uint64_t trial_seed = options.seed + t;
    Rng split_rng(trial_seed);
    const Split split = train_test_split(ds, options.train_fraction, split_rng);
    Dataset train = split.train;
    train.labels.reset();
    for (std::size_t a = 0; a < options.algorithms.size(); ++a) {
      RsmmConfig c = algorithm_config(options.algorithms[a], config, ds);
      c.seed = trial_seed;
      const auto start = std::chrono::steady_clock::now();
      const RsmmModel model = fit(train, c);
      const auto scores = score(model, split.test);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::vector<double> anomaly(scores.size());
      for (std::size_t i = 0; i < scores.size(); ++i) anomaly[i] = scores[i].anomaly_score;
      results[a].trials.push_back({t, roc_auc(anomaly, *split.test.labels), seconds});
    }
  }
  for (auto& r : results) r.summarize();
  return results;
}

inline void write_results_csv(const std::vector<BenchmarkResult>& results, std::ostream& out) {
  out << "dataset,algorithm,trial,auc,seconds\n";
  out.precision(17);
  for (const auto& r : results)
    for (const auto& t : r.trials) out << r.dataset << ',' << r.algorithm << ',' << t.trial << ',' << t.auc << ',' << t.seconds << '\n';
}

inline nlohmann::json results_summary_json(const std::vector<BenchmarkResult>& results) {
  auto out = nlohmann::json::array();
  for (const auto& r : results)
    out.push_back({{"dataset", r.dataset},
                   {"algorithm", r.algorithm},
                   {"train_fraction", r.train_fraction},
                   {"trials", r.trials.size()},
                   {"mean_auc", r.mean_auc},
                   {"std_auc", r.std_auc}});
  return out;
}

}  // namespace rsmm
