#pragma once

// The random subspace mixture ensemble: one BIC-selected Gaussian mixture per
// random attribute subspace, combined by rescaled geometric averaging.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsmm/dataset.hpp"
#include "rsmm/error.hpp"
#include "rsmm/gmm.hpp"
#include "rsmm/numeric.hpp"
#include "rsmm/parallel.hpp"
#include "rsmm/random.hpp"
#include "rsmm/subspace.hpp"

namespace rsmm {

enum class Combination { geometric, arithmetic, minimum };

inline std::string_view to_string(Combination c) {
  switch (c) {
    case Combination::geometric: return "geometric";
    case Combination::arithmetic: return "arithmetic";
    case Combination::minimum: return "minimum";
  }
  return "geometric";
}

inline Combination parse_combination(std::string_view text) {
  if (text == "geometric") return Combination::geometric;
  if (text == "arithmetic") return Combination::arithmetic;
  if (text == "minimum") return Combination::minimum;
  throw ConfigError("unknown combination '" + std::string(text) + "' (expected geometric, arithmetic or minimum)");
}

struct RsmmConfig {
  /// Subspace dimension; unset means 2, or 2·⌈c̄⌉ when every column is
  /// categorical (c̄ = mean category count).
  std::optional<std::size_t> k;
  /// Requested subspace count; unset means 3n. Always snapped to a multiple
  /// of LCM(k, n)/k.
  std::optional<std::size_t> m;
  double gamma = 0.01;
  std::size_t n_init = 3;
  std::uint64_t seed = 0;
  Combination combination = Combination::geometric;
  double tol = 1e-6;
  std::size_t max_iter = 200;
  std::size_t c_max = 32;
  /// Worker threads for subspace fits; 0 = all available. Does not affect
  /// results.
  std::size_t threads = 0;

  SelectOptions select_options() const { return {{n_init, tol, max_iter}, c_max}; }
};

struct RsmmModel {
  Schema schema;
  ColumnMap columns;
  Standardizer standardizer;
  /// Per encoded attribute, min and max of the clean training data in z units.
  Eigen::VectorXd z_min;
  Eigen::VectorXd z_max;
  SubspacePlan plan;
  std::vector<GmmModel> gmms;  ///< gmms[i] models plan.subspaces[i]
  RsmmConfig config;
  /// Per subspace, sorted guarded log-densities of the (noised) training
  /// projections.
  std::vector<std::vector<double>> train_log_densities;
  /// Sorted geometric-combination log-densities of the training rows.
  std::vector<double> train_scores;

  std::size_t n() const { return plan.n; }
  std::size_t k() const { return plan.k; }
  std::size_t m() const { return plan.m(); }
  std::size_t train_size() const { return train_scores.size(); }
  /// The n/k exponent together with the 1/m of the geometric mean.
  double rescale() const { return static_cast<double>(n()) / (static_cast<double>(k()) * static_cast<double>(m())); }
};

struct ScoreResult {
  double log_density = 0.0;
  double anomaly_score = 0.0;  ///< -log_density; larger is more anomalous
  std::vector<double> per_subspace_log_density;
};

/// Subspace dimension used when the config leaves k unset.
inline std::size_t default_subspace_dim(const Schema& schema) {
  std::size_t categorical = 0;
  std::size_t categories = 0;
  for (const auto& c : schema) {
    if (c.kind != ColumnKind::categorical) return 2;
    ++categorical;
    categories += c.categories.size();
  }
  if (categorical == 0) return 2;
  const auto mean_ceil = (categories + categorical - 1) / categorical;
  return 2 * mean_ceil;
}

/// Columns of `z` listed in `subspace`.
inline Eigen::MatrixXd project(const Eigen::MatrixXd& z, const Subspace& subspace) {
  Eigen::MatrixXd out(z.rows(), static_cast<Eigen::Index>(subspace.size()));
  for (std::size_t j = 0; j < subspace.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = z.col(static_cast<Eigen::Index>(subspace[j]));
  return out;
}

/// Guarded per-row log-densities log(gmm(x) + ε).
inline Eigen::VectorXd subspace_log_densities(const GmmModel& gmm, const Eigen::MatrixXd& projected) {
  Eigen::VectorXd d = gmm.log_density_rows(projected);
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = guarded_log_density(d(i));
  return d;
}

/// Combines guarded subspace log-densities into one log-density.
/// geometric: (n/k)·(1/m)·Σd; arithmetic: log mean exp(d); minimum: min d.
inline double combine_log_densities(std::span<const double> d, Combination how, double rescale) {
  if (d.empty()) throw ConfigError("nothing to combine");
  switch (how) {
    case Combination::geometric: {
      double sum = 0.0;
      for (double v : d) sum += v;
      return rescale * sum;
    }
    case Combination::arithmetic:
      return log_sum_exp(d) - std::log(static_cast<double>(d.size()));
    case Combination::minimum:
      return *std::min_element(d.begin(), d.end());
  }
  return 0.0;
}

using SubspaceCallback = std::function<void(std::size_t index, const Subspace&, const GmmModel&)>;

/// Fits the ensemble to every row of `ds` (labels, if any, are ignored).
inline RsmmModel fit(const Dataset& ds, const RsmmConfig& config, const SubspaceCallback& on_subspace = {}) {
  if (ds.rows() < 2) throw DataError("need at least 2 training rows, got " + std::to_string(ds.rows()));
  if (!(config.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (config.n_init == 0) throw ConfigError("n_init must be >= 1");

  RsmmModel model;
  model.config = config;
  model.schema = ds.schema();
  auto encoded = one_hot_encode(ds);
  model.columns = encoded.map;
  const std::size_t n = model.columns.size();
  const std::size_t k = config.k.value_or(std::min(default_subspace_dim(model.schema), n));
  if (k == 0) throw ConfigError("k must be >= 1");
  if (k > n)
    throw ConfigError("subspace dimension k=" + std::to_string(k) + " exceeds encoded dimensionality n=" +
                      std::to_string(n));
  std::size_t m = resolve_subspace_count(n, k, config.m.value_or(3 * n));
  if (!config.m) m = std::min(m, binomial(n, k));

  model.standardizer = fit_standardizer(encoded.values);
  const Eigen::MatrixXd z = apply_standardizer(model.standardizer, encoded.values);
  encoded.values.resize(0, 0);
  model.z_min = z.colwise().minCoeff().transpose();
  model.z_max = z.colwise().maxCoeff().transpose();

  Rng plan_stream = plan_rng(config.seed);
  model.plan = generate_plan(n, k, m, plan_stream);

  const auto s = z.rows();
  const SelectOptions select = config.select_options();
  std::vector<std::optional<GmmModel>> fitted(m);
  std::vector<Eigen::VectorXd> densities(m);
  parallel_for(m, config.threads, [&](std::size_t i) {
    Rng rng = subspace_rng(config.seed, i);
    const Eigen::MatrixXd projected = add_noise(project(z, model.plan.subspaces[i]), config.gamma, rng);
    GmmModel gmm = select_components(projected, select, rng);
    densities[i] = subspace_log_densities(gmm, projected);
    fitted[i] = std::move(gmm);
  });

  model.gmms.reserve(m);
  model.train_log_densities.resize(m);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(s);
  for (std::size_t i = 0; i < m; ++i) {
    model.gmms.push_back(std::move(*fitted[i]));
    totals += densities[i];
    auto& sorted = model.train_log_densities[i];
    sorted.assign(densities[i].data(), densities[i].data() + s);
    std::sort(sorted.begin(), sorted.end());
    if (on_subspace) on_subspace(i, model.plan.subspaces[i], model.gmms.back());
  }
  totals *= model.rescale();
  model.train_scores.assign(totals.data(), totals.data() + s);
  std::sort(model.train_scores.begin(), model.train_scores.end());
  return model;
}

/// Scores already-encoded rows (s × n, raw units).
inline std::vector<ScoreResult> score_encoded(const RsmmModel& model, const Eigen::MatrixXd& encoded,
                                              std::optional<Combination> combination = std::nullopt) {
  if (model.gmms.size() != model.m()) throw ConfigError("model has " + std::to_string(model.gmms.size()) +
                                                        " mixtures for " + std::to_string(model.m()) + " subspaces");
  const Eigen::MatrixXd z = apply_standardizer(model.standardizer, encoded);
  const auto s = z.rows();
  const std::size_t m = model.m();
  Eigen::MatrixXd d(s, static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (model.gmms[i].dim != model.plan.subspaces[i].size())
      throw ConfigError("mixture " + std::to_string(i) + " dimension does not match its subspace");
    d.col(static_cast<Eigen::Index>(i)) = subspace_log_densities(model.gmms[i], project(z, model.plan.subspaces[i]));
  }
  const Combination how = combination.value_or(model.config.combination);
  const double rescale = model.rescale();
  std::vector<ScoreResult> out(static_cast<std::size_t>(s));
  for (Eigen::Index r = 0; r < s; ++r) {
    auto& res = out[static_cast<std::size_t>(r)];
    res.per_subspace_log_density.resize(m);
    for (std::size_t i = 0; i < m; ++i) res.per_subspace_log_density[i] = d(r, static_cast<Eigen::Index>(i));
    res.log_density = combine_log_densities(res.per_subspace_log_density, how, rescale);
    res.anomaly_score = -res.log_density;
  }
  return out;
}

/// Scores the rows of `ds`, matched to the model's schema by column name. No
/// noise is added.
inline std::vector<ScoreResult> score(const RsmmModel& model, const Dataset& ds,
                                      std::vector<EncodingWarning>* warnings = nullptr,
                                      std::optional<Combination> combination = std::nullopt) {
  return score_encoded(model, encode_with_schema(model.schema, ds, warnings), combination);
}

/// Number of subspaces per selected component count.
inline std::map<std::size_t, std::size_t> component_histogram(const RsmmModel& model) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& g : model.gmms) ++hist[g.size()];
  return hist;
}

}  // namespace rsmm
