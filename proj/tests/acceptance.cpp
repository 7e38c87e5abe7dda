// Acceptance suite: one PASS/FAIL/SKIPPED line per criterion. Exits nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rsmm/rsmm.hpp"
#include "test_util.hpp"

namespace {

using namespace rsmm;
using rsmm::testing::brute_force_auc;
using rsmm::testing::gaussian_blobs;
using rsmm::testing::kPlantedDim;
using rsmm::testing::planted_dataset;
using rsmm::testing::planted_inlier;

enum class Outcome { pass, fail, skipped };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Verdict fail(std::string d) { return {Outcome::fail, std::move(d)}; }
Verdict check(bool ok, std::string d) { return {ok ? Outcome::pass : Outcome::fail, std::move(d)}; }

template <typename T>
std::string fmt(T v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::vector<double> anomaly_scores(const std::vector<ScoreResult>& r) {
  std::vector<double> out;
  out.reserve(r.size());
  for (const auto& x : r) out.push_back(x.anomaly_score);
  return out;
}

Eigen::MatrixXd zscore_with(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu, const Eigen::RowVectorXd& sd) {
  return (x.rowwise() - mu).array().rowwise() / sd.array();
}

// ---------------------------------------------------------------------------

Verdict limiting_cases() {
  Rng gen(101);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(200, 4);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double shift = i % 3 == 0 ? 3.0 : 0.0;
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = shift + normal(gen) + (j > 0 ? 0.5 * x(i, j - 1) : 0.0);
  }
  const Eigen::MatrixXd train = x.topRows(140);
  const Eigen::MatrixXd test = x.bottomRows(60);
  const Eigen::RowVectorXd mu = train.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((train.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt();
  const Eigen::MatrixXd z_train = zscore_with(train, mu, sd);
  const Eigen::MatrixXd z_test = zscore_with(test, mu, sd);

  RsmmConfig c;
  c.gamma = 0.0;
  c.seed = 77;
  double worst = 0.0;

  {
    c.k = 4;
    c.m = 1;
    const RsmmModel model = fit(Dataset::from_matrix(train), c);
    const Subspace& s = model.plan.subspaces[0];
    Eigen::MatrixXd proj(z_train.rows(), 4), proj_test(z_test.rows(), 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
      proj.col(j) = z_train.col(static_cast<Eigen::Index>(s[static_cast<std::size_t>(j)]));
      proj_test.col(j) = z_test.col(static_cast<Eigen::Index>(s[static_cast<std::size_t>(j)]));
    }
    Rng rng = subspace_rng(c.seed, 0);
    const GmmModel standalone = select_components(proj, c.select_options(), rng);
    const auto scored = score_encoded(model, test);
    for (Eigen::Index r = 0; r < test.rows(); ++r)
      worst = std::max(worst, std::abs(scored[static_cast<std::size_t>(r)].log_density -
                                       standalone.log_density(proj_test.row(r).transpose())));
  }
  {
    c.k = 1;
    c.m = 4;
    const RsmmModel model = fit(Dataset::from_matrix(train), c);
    std::vector<GmmModel> marginals;
    for (std::size_t i = 0; i < 4; ++i) {
      Rng rng = subspace_rng(c.seed, i);
      marginals.push_back(select_components(z_train.col(static_cast<Eigen::Index>(model.plan.subspaces[i][0])),
                                            c.select_options(), rng));
    }
    const auto scored = score_encoded(model, test);
    for (Eigen::Index r = 0; r < test.rows(); ++r) {
      double sum = 0.0;
      for (std::size_t i = 0; i < 4; ++i)
        sum += marginals[i].log_density(
            Eigen::VectorXd::Constant(1, z_test(r, static_cast<Eigen::Index>(model.plan.subspaces[i][0]))));
      worst = std::max(worst, std::abs(scored[static_cast<std::size_t>(r)].log_density - sum));
    }
  }
  return check(worst <= 1e-9, "max |difference| " + fmt(worst, 3) + " over 60 test points, both limits");
}

Verdict rank_invariance() {
  const auto data = planted_dataset(202, 800, 20);
  RsmmConfig c;
  c.seed = 3;
  c.n_init = 1;
  const RsmmModel model = fit(Dataset::from_matrix(data.x), c);
  Rng gen(5);
  std::uniform_real_distribution<double> box(-9.0, 9.0);
  Eigen::MatrixXd pts(1000, static_cast<Eigen::Index>(kPlantedDim));
  for (auto& v : pts.reshaped()) v = box(gen);
  const auto scored = score_encoded(model, pts);
  std::vector<double> scaled, unscaled;
  for (const auto& r : scored) {
    scaled.push_back(r.log_density);
    double sum = 0.0;
    for (double d : r.per_subspace_log_density) sum += d;
    unscaled.push_back(sum / static_cast<double>(model.m()));
  }
  const auto argsort = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    return idx;
  };
  return check(argsort(scaled) == argsort(unscaled),
               "1000 points, n/k = " + fmt(static_cast<double>(model.n()) / static_cast<double>(model.k())));
}

Verdict equal_representation() {
  Rng gen(303);
  std::uniform_int_distribution<std::size_t> pick_n(2, 40);
  std::size_t accepted = 0, violations = 0;
  while (accepted < 100) {
    const std::size_t n = pick_n(gen);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 8))(gen);
    const std::size_t want = std::uniform_int_distribution<std::size_t>(1, 5 * n)(gen);
    const std::size_t m = resolve_subspace_count(n, k, want);
    if (m > binomial(n, k)) continue;
    Rng rng(gen());
    const SubspacePlan plan = generate_plan(n, k, m, rng);
    if (!validate_plan(plan).empty() || plan.representation() * n != m * k) ++violations;
    ++accepted;
  }
  return check(violations == 0, "100 feasible triples, " + std::to_string(violations) + " violations");
}

double quadrature_1d(const GmmModel& g, double lo, double hi, int cells) {
  const double h = (hi - lo) / cells;
  Eigen::MatrixXd pts(cells, 1);
  for (int i = 0; i < cells; ++i) pts(i, 0) = lo + (i + 0.5) * h;
  return g.log_density_rows(pts).array().exp().sum() * h;
}

double quadrature_2d(const GmmModel& g, Eigen::Vector2d lo, Eigen::Vector2d hi, int cells) {
  const Eigen::Vector2d h = (hi - lo) / cells;
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(cells) * cells, 2);
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j) pts.row(i * cells + j) << lo(0) + (i + 0.5) * h(0), lo(1) + (j + 0.5) * h(1);
  return g.log_density_rows(pts).array().exp().sum() * h(0) * h(1);
}

Verdict em_bic() {
  Rng gen(404);
  std::uniform_real_distribution<double> center(-4.0, 4.0);
  std::size_t decreases = 0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index k = 1 + t % 3;
    std::vector<Eigen::VectorXd> centers;
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd v(k);
      for (auto& e : v) e = center(gen);
      centers.push_back(v);
    }
    const Eigen::MatrixXd x = gaussian_blobs(centers, 1.0, 50, 1000 + static_cast<std::uint64_t>(t));
    Rng rng(static_cast<std::uint64_t>(t));
    const GmmModel g = em_fit(x, 1 + static_cast<std::size_t>(t) % 4, {}, rng);
    const auto& trace = g.diagnostics.ll_trace;
    const auto& irregular = g.diagnostics.irregular_steps;
    for (std::size_t i = 1; i < trace.size(); ++i)
      if (std::find(irregular.begin(), irregular.end(), i) == irregular.end() && trace[i] < trace[i - 1] - 1e-8)
        ++decreases;
  }

  int three = 0;
  const std::vector<Eigen::VectorXd> centers{Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), Eigen::Vector2d(5, 8.660254)};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd x = gaussian_blobs(centers, 1.0, 334, 2000 + seed).topRows(1000);
    Rng rng(seed);
    three += select_components(x, {}, rng).size() == 3 ? 1 : 0;
  }

  const Eigen::MatrixXd x1 =
      gaussian_blobs({Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.5)}, 0.8, 250, 11);
  const Eigen::MatrixXd x2 = gaussian_blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(4, 2)}, 1.0, 250, 12);
  Rng r1(1), r2(2);
  const GmmModel g1 = select_components(x1, {}, r1);
  const GmmModel g2 = select_components(x2, {}, r2);
  const double mass1 = quadrature_1d(g1, x1.minCoeff() - 15.0, x1.maxCoeff() + 15.0, 40000);
  const double mass2 = quadrature_2d(g2, x2.colwise().minCoeff().transpose().array() - 12.0,
                                     x2.colwise().maxCoeff().transpose().array() + 12.0, 800);
  const bool ok = decreases == 0 && three >= 8 && std::abs(mass1 - 1.0) <= 1e-3 && std::abs(mass2 - 1.0) <= 1e-3;
  return check(ok, std::to_string(decreases) + " LL decreases in 50 fits; c=3 chosen " + std::to_string(three) +
                       "/10; mass 1-D " + fmt(mass1, 7) + ", 2-D " + fmt(mass2, 7));
}

Verdict auc_oracle() {
  Rng gen(505);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t s = 10 + static_cast<std::size_t>(t) * 4;
    std::uniform_int_distribution<int> coarse(0, 3 + t % 20);
    std::bernoulli_distribution positive(0.1 + 0.008 * t);
    std::vector<double> scores(s);
    std::vector<int> labels(s);
    for (std::size_t i = 0; i < s; ++i) {
      scores[i] = coarse(gen);
      labels[i] = positive(gen) ? 1 : 0;
    }
    labels[0] = 0;
    labels[1] = 1;
    worst = std::max(worst, std::abs(roc_auc(scores, labels) - brute_force_auc(scores, labels)));
  }
  return check(worst <= 1e-12, "max |difference| " + fmt(worst, 3) + " over 100 tied instances");
}

// Criteria 6, 8 and 9 share the planted benchmark.
struct PlantedTrial {
  RsmmModel model;
  Split split;
  double auc = 0.0;
};

constexpr std::uint64_t kPlantedSeed = 606;
constexpr std::size_t kTrials = 10;

std::vector<PlantedTrial> run_planted(const Dataset& ds, double fraction, bool keep_models) {
  std::vector<PlantedTrial> out;
  for (std::size_t t = 0; t < kTrials; ++t) {
    const std::uint64_t trial_seed = kPlantedSeed + t;
    Rng split_rng(trial_seed);
    PlantedTrial trial;
    trial.split = train_test_split(ds, fraction, split_rng);
    Dataset train = trial.split.train;
    train.labels.reset();
    RsmmConfig c;
    c.seed = trial_seed;
    trial.model = fit(train, c);
    trial.auc = roc_auc(anomaly_scores(score(trial.model, trial.split.test)), *trial.split.test.labels);
    if (!keep_models) {
      trial.model = {};
      trial.split = {};
    }
    out.push_back(std::move(trial));
  }
  return out;
}

double mean_auc(const std::vector<PlantedTrial>& trials) {
  double m = 0.0;
  for (const auto& t : trials) m += t.auc;
  return m / static_cast<double>(trials.size());
}

Verdict planted_benchmark(const std::vector<PlantedTrial>& trials, double seconds) {
  const double m = mean_auc(trials);
  const RsmmModel& model = trials.front().model;
  return check(m >= 0.95 && model.k() == 2 && model.m() == 30,
               "mean AUC " + fmt(m) + " over 10 trials (k=" + std::to_string(model.k()) + ", m=" +
                   std::to_string(model.m()) + ", " + fmt(seconds, 3) + " s)");
}

Verdict small_fraction(const Dataset& ds, double reference) {
  const double m = mean_auc(run_planted(ds, 0.05, false));
  return check(std::abs(m - reference) <= 0.03,
               "mean AUC " + fmt(m) + " at 5% training vs " + fmt(reference) + " at 60%");
}

Verdict interpretability(const std::vector<PlantedTrial>& trials) {
  std::size_t broken = 0;
  std::size_t hits = 0;
  Rng gen(909);
  for (const auto& trial : trials) {
    const RsmmModel& model = trial.model;
    const std::size_t r = model.plan.representation();
    const auto thresholds = subspace_thresholds(model, 0.02);
    for (const auto& p : score(model, trial.split.test))
      for (const auto& a : attribute_attribution(model, p.per_subspace_log_density, thresholds, false))
        broken += a.pa + a.pn == r ? 0 : 1;

    Eigen::VectorXd x = planted_inlier(gen);
    std::uniform_int_distribution<std::size_t> coord(0, kPlantedDim - 1);
    const std::size_t a = coord(gen);
    std::size_t b = coord(gen);
    while (b == a) b = coord(gen);
    x(static_cast<Eigen::Index>(a)) = 14.0;
    x(static_cast<Eigen::Index>(b)) = -14.0;
    const auto p = score_encoded(model, x.transpose())[0];
    const auto ranked = attribute_attribution(model, p.per_subspace_log_density, thresholds, true);
    std::vector<std::size_t> top{ranked[0].encoded[0], ranked[1].encoded[0]};
    std::sort(top.begin(), top.end());
    hits += top == std::vector<std::size_t>{std::min(a, b), std::max(a, b)} ? 1 : 0;
  }
  return check(broken == 0 && hits >= 8, std::to_string(broken) + " PA+PN violations; planted pair ranked top-2 in " +
                                             std::to_string(hits) + "/10 trials");
}

Verdict determinism() {
  const auto data = planted_dataset(1010, 600, 12);
  const Dataset ds = Dataset::from_matrix(data.x);
  RsmmConfig c;
  c.seed = 42;
  c.n_init = 1;
  const RsmmModel a = fit(ds, c);
  const RsmmModel b = fit(ds, c);
  const std::string text = serialize_model(a);
  const bool identical = text == serialize_model(b);
  const auto path = (std::filesystem::temp_directory_path() / "rsmm_acceptance_model.json").string();
  save_model(a, path);
  const RsmmModel loaded = load_model(path);
  std::filesystem::remove(path);
  const auto before = score(a, ds);
  const auto after = score(loaded, ds);
  double worst = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    worst = std::max(worst, std::abs(before[i].log_density - after[i].log_density) /
                                std::max(1.0, std::abs(before[i].log_density)));
  return check(identical && worst <= 1e-12, std::string(identical ? "byte-identical" : "DIFFERENT") +
                                                " model files; max relative score change " + fmt(worst, 3));
}

Verdict reference_datasets() {
  const char* dir = std::getenv("RSMM_ODDS_DIR");
  if (!dir) return {Outcome::skipped, "set RSMM_ODDS_DIR to a directory with annthyroid.csv, shuttle.csv, satellite.csv"};
  struct Target {
    const char* file;
    double auc;
  };
  const Target targets[] = {{"annthyroid.csv", 0.90}, {"shuttle.csv", 0.98}, {"satellite.csv", 0.80}};
  std::string detail;
  bool ok = true;
  for (const auto& t : targets) {
    const auto path = std::filesystem::path(dir) / t.file;
    if (!std::filesystem::exists(path)) return {Outcome::skipped, std::string(t.file) + " not found in " + dir};
    CsvOptions opts;
    opts.label_column = "label";
    const Dataset ds = load_csv(path.string(), opts);
    BenchmarkOptions bench;
    bench.algorithms = {Algorithm::rsmm};
    const auto results = run_benchmark(ds, {}, bench);
    const double m = results.front().mean_auc;
    ok = ok && std::abs(m - t.auc) <= 0.03;
    detail += std::string(detail.empty() ? "" : "; ") + t.file + " " + fmt(m) + " (target " + fmt(t.auc) + ")";
  }
  return check(ok, detail);
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Verdict()>& run) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIPPED";
    if (v.outcome == Outcome::fail) ++failures;
    std::cout << tag << " " << id << " " << name << ": " << v.detail << std::endl;
  };

  report(1, "limiting-case equivalence", limiting_cases);
  report(2, "rank invariance of rescaling", rank_invariance);
  report(3, "equal representation", equal_representation);
  report(4, "EM/BIC correctness", em_bic);
  report(5, "AUC oracle", auc_oracle);

  const auto data = planted_dataset(kPlantedSeed);
  const Dataset planted = Dataset::from_matrix(data.x, data.labels);
  std::vector<PlantedTrial> trials;
  double seconds = 0.0;
  try {
    const auto start = std::chrono::steady_clock::now();
    trials = run_planted(planted, 0.6, true);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } catch (const std::exception& e) {
    std::cerr << "planted benchmark failed: " << e.what() << "\n";
  }
  const auto need_trials = [&](auto body) {
    return [&, body]() -> Verdict {
      if (trials.size() != kTrials) return fail("planted benchmark did not complete");
      return body();
    };
  };
  report(6, "synthetic anomaly benchmark", need_trials([&] { return planted_benchmark(trials, seconds); }));
  report(7, "reference dataset AUCs", reference_datasets);
  report(8, "small-fraction robustness", need_trials([&] { return small_fraction(planted, mean_auc(trials)); }));
  report(9, "interpretability conservation", need_trials([&] { return interpretability(trials); }));
  report(10, "determinism and persistence", determinism);
  return failures == 0 ? 0 : 1;
}
