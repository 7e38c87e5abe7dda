#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "rsmm/eval.hpp"
#include "test_util.hpp"

namespace rsmm {
namespace {

using testing::brute_force_auc;

Dataset labeled_blobs(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> box(-6.0, 6.0);
  Eigen::MatrixXd x(220, 3);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = normal(rng);
    labels.push_back(0);
  }
  for (Eigen::Index i = 200; i < 220; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = box(rng);
    labels.push_back(1);
  }
  return Dataset::from_matrix(x, labels);
}

TEST(Split, CountsAndDisjointness) {
  const Dataset ds = labeled_blobs(1);
  Rng rng(5);
  const Split s = train_test_split(ds, 0.6, rng);
  EXPECT_EQ(s.train.rows(), 132u);
  EXPECT_EQ(s.test.rows(), 88u);
  std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
  all.insert(s.test_rows.begin(), s.test_rows.end());
  EXPECT_EQ(all.size(), 220u);
  for (std::size_t i = 0; i < s.test_rows.size(); ++i) EXPECT_EQ((*s.test.labels)[i], (*ds.labels)[s.test_rows[i]]);
}

TEST(Split, DeterministicPerSeed) {
  const Dataset ds = labeled_blobs(2);
  Rng a(9), b(9), c(10);
  EXPECT_EQ(train_test_split(ds, 0.5, a).train_rows, train_test_split(ds, 0.5, b).train_rows);
  Rng d(9);
  EXPECT_NE(train_test_split(ds, 0.5, d).train_rows, train_test_split(ds, 0.5, c).train_rows);
}

TEST(Split, RejectsDegenerateFractions) {
  const Dataset ds = labeled_blobs(3);
  Rng rng(0);
  EXPECT_THROW(train_test_split(ds, 0.0, rng), ConfigError);
  EXPECT_THROW(train_test_split(ds, 1.0, rng), ConfigError);
  EXPECT_THROW(train_test_split(ds, 0.001, rng), ConfigError);
}

TEST(RocAuc, HandExamples) {
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(RocAuc, MatchesPairwiseDefinition) {
  Rng rng(11);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::bernoulli_distribution positive(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(5 + trial * 3);
    std::vector<int> l(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = coarse(rng);  // many ties
      l[i] = positive(rng) ? 1 : 0;
    }
    l[0] = 0;
    l[1] = 1;
    EXPECT_NEAR(roc_auc(s, l), brute_force_auc(s, l), 1e-12);
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransforms) {
  Rng rng(12);
  std::normal_distribution<double> normal;
  std::vector<double> s(300), t(300);
  std::vector<int> l(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    l[i] = i % 5 == 0 ? 1 : 0;
    s[i] = normal(rng) + l[i];
    t[i] = std::exp(3.0 * s[i]) + 7.0;
  }
  EXPECT_DOUBLE_EQ(roc_auc(s, l), roc_auc(t, l));
  std::vector<double> negated(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) negated[i] = -s[i];
  EXPECT_NEAR(roc_auc(negated, l), 1.0 - roc_auc(s, l), 1e-12);
}

TEST(RocAuc, RejectsBadInput) {
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), DataError);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{0, 0}), DataError);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{0}), DataError);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{0, 2}), DataError);
  EXPECT_THROW(roc_auc(std::vector<double>{1, std::nan("")}, std::vector<int>{0, 1}), DataError);
}

TEST(Algorithms, FullGmmIsOneSubspace) {
  const Dataset ds = labeled_blobs(4);
  const RsmmConfig c = algorithm_config(Algorithm::full_gmm, {}, ds);
  EXPECT_EQ(c.k, 3u);
  EXPECT_EQ(c.m, 1u);
  EXPECT_EQ(parse_algorithm("rsmm"), Algorithm::rsmm);
  EXPECT_EQ(parse_algorithm("full_gmm"), Algorithm::full_gmm);
  EXPECT_THROW(parse_algorithm("iforest"), ConfigError);
}

TEST(Benchmark, DeterministicAndSummarized) {
  const Dataset ds = labeled_blobs(5);
  RsmmConfig c;
  c.n_init = 1;
  c.c_max = 3;
  BenchmarkOptions opts;
  opts.trials = 3;
  opts.seed = 40;
  const auto a = run_benchmark(ds, c, opts);
  const auto b = run_benchmark(ds, c, opts);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].trials.size(), 3u);
    double mean = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(a[i].trials[t].auc, b[i].trials[t].auc);
      EXPECT_EQ(a[i].trials[t].trial, t);
      EXPECT_GT(a[i].trials[t].auc, 0.8);
      mean += a[i].trials[t].auc / 3.0;
    }
    double var = 0.0;
    for (const auto& t : a[i].trials) var += (t.auc - mean) * (t.auc - mean) / 3.0;
    EXPECT_NEAR(a[i].mean_auc, mean, 1e-12);
    EXPECT_NEAR(a[i].std_auc, std::sqrt(var), 1e-12);
  }
  EXPECT_EQ(a[0].algorithm, "rsmm");
  EXPECT_EQ(a[1].algorithm, "full_gmm");

  // Trial t reproduces a standalone fit on the same split.
  Rng split_rng(41);
  const Split s = train_test_split(ds, 0.6, split_rng);
  RsmmConfig single = c;
  single.seed = 41;
  const auto scored = score(fit(s.train, single), s.test);
  std::vector<double> anomaly;
  for (const auto& r : scored) anomaly.push_back(r.anomaly_score);
  EXPECT_EQ(a[0].trials[1].auc, roc_auc(anomaly, *s.test.labels));
}

TEST(Benchmark, OutputFormats) {
  BenchmarkResult r{"toy", "rsmm", 0.6, {{0, 0.9, 1.0}, {1, 0.7, 2.0}}, 0.0, 0.0};
  r.summarize();
  EXPECT_DOUBLE_EQ(r.mean_auc, 0.8);
  EXPECT_NEAR(r.std_auc, 0.1, 1e-12);
  std::ostringstream out;
  write_results_csv({r}, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "dataset,algorithm,trial,auc,seconds");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  const auto j = results_summary_json({r});
  EXPECT_EQ(j[0].at("trials"), 2);
  EXPECT_EQ(j[0].at("algorithm"), "rsmm");
}

TEST(Benchmark, NeedsLabels) {
  Dataset ds = labeled_blobs(6);
  ds.labels.reset();
  EXPECT_THROW(run_benchmark(ds, {}, {}), DataError);
}

}  // namespace
}  // namespace rsmm
