#pragma once

// Full-covariance Gaussian mixtures: densities, k-means++ initialization,
// EM with restarts, and incremental BIC selection of the component count.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rsmm/error.hpp"
#include "rsmm/numeric.hpp"
#include "rsmm/random.hpp"

namespace rsmm {

inline constexpr double kCovarianceRidge = 1e-6;

/// One multivariate normal component with its mixture weight. The Cholesky
/// factor is computed on construction; a ridge is added to the covariance
/// (1e-6·I, escalating by 10x) while factorization fails.
class GaussianComponent {
 public:
  GaussianComponent(double weight, Eigen::VectorXd mean, Eigen::MatrixXd covariance)
      : weight_(weight), mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const auto k = mean_.size();
    if (k == 0) throw DataError("component mean is empty");
    if (covariance_.rows() != k || covariance_.cols() != k)
      throw DataError("covariance is " + std::to_string(covariance_.rows()) + "x" + std::to_string(covariance_.cols()) +
                      " for a " + std::to_string(k) + "-dimensional mean");
    if (!mean_.allFinite() || !covariance_.allFinite()) throw NumericalError("non-finite component parameters");
    if (!(weight_ > 0.0) || weight_ > 1.0 + 1e-12) throw NumericalError("component weight outside (0, 1]");
    covariance_ = 0.5 * (covariance_ + covariance_.transpose());
    double ridge = kCovarianceRidge;
    for (int attempt = 0; !factorize(); ++attempt) {
      if (attempt == 6) throw NumericalError("covariance is not positive definite after regularization");
      covariance_.diagonal().array() += ridge;
      ridge *= 10.0;
      regularized_ = true;
    }
  }

  double weight() const { return weight_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  double log_det() const { return log_det_; }
  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  /// True when a ridge had to be added to make the covariance factorizable.
  bool regularized() const { return regularized_; }

  /// log N(x; mean, covariance).
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != mean_.size())
      throw DataError("point has dimension " + std::to_string(x.size()) + ", component " + std::to_string(mean_.size()));
    const Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -0.5 * (static_cast<double>(mean_.size()) * kLog2Pi + log_det_ + y.squaredNorm());
  }

  /// log N for every row of `rows` (s × k) written into `out`.
  void log_density_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows, Eigen::Ref<Eigen::VectorXd> out) const {
    Eigen::MatrixXd centered = (rows.rowwise() - mean_.transpose()).transpose();
    chol_.triangularView<Eigen::Lower>().solveInPlace(centered);
    const double base = static_cast<double>(mean_.size()) * kLog2Pi + log_det_;
    out = -0.5 * (centered.colwise().squaredNorm().transpose().array() + base);
  }

 private:
  bool factorize() {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() != Eigen::Success) return false;
    chol_ = llt.matrixL();
    const auto diag = chol_.diagonal();
    if (!diag.allFinite() || (diag.array() <= 0.0).any()) return false;
    log_det_ = 2.0 * diag.array().log().sum();
    return std::isfinite(log_det_);
  }

  double weight_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  bool regularized_ = false;
};

inline double gaussian_log_density(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianComponent& comp) {
  return comp.log_density(x);
}

/// Free parameters of a full-covariance mixture: c·(k + k(k+1)/2) + (c−1).
inline double degrees_of_freedom(std::size_t components, std::size_t dim) {
  const double c = static_cast<double>(components);
  const double k = static_cast<double>(dim);
  return c * (k + k * (k + 1.0) / 2.0) + (c - 1.0);
}

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

inline InformationCriteria information_criteria(double log_likelihood, double nu, std::size_t samples) {
  if (samples == 0) throw ConfigError("information criteria need at least one sample");
  return {2.0 * nu - 2.0 * log_likelihood, std::log(static_cast<double>(samples)) * nu - 2.0 * log_likelihood};
}

struct GmmDiagnostics {
  /// Training log-likelihood after initialization and after every EM step of
  /// the winning restart.
  std::vector<double> ll_trace;
  /// Steps (indices into ll_trace) reached through a ridge or a component
  /// reinitialization; EM monotonicity is not guaranteed across those.
  std::vector<std::size_t> irregular_steps;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t failed_restarts = 0;
  /// BIC for c = 1, 2, ... as visited by the component search.
  std::vector<double> bic_trace;
};

struct GmmModel {
  std::vector<GaussianComponent> components;
  std::size_t dim = 0;
  double log_likelihood = 0.0;
  double nu = 0.0;
  double bic = 0.0;
  double aic = 0.0;
  GmmDiagnostics diagnostics;

  std::size_t size() const { return components.size(); }

  /// log Σ w_i N(x; μ_i, Σ_i).
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (static_cast<std::size_t>(x.size()) != dim)
      throw DataError("point has dimension " + std::to_string(x.size()) + ", model " + std::to_string(dim));
    std::vector<double> terms;
    terms.reserve(components.size());
    for (const auto& c : components) terms.push_back(std::log(c.weight()) + c.log_density(x));
    return log_sum_exp(terms);
  }

  /// Mixture log-density of every row of `rows`.
  Eigen::VectorXd log_density_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const {
    if (static_cast<std::size_t>(rows.cols()) != dim)
      throw DataError("rows have dimension " + std::to_string(rows.cols()) + ", model " + std::to_string(dim));
    Eigen::MatrixXd terms(rows.rows(), static_cast<Eigen::Index>(components.size()));
    for (std::size_t j = 0; j < components.size(); ++j) {
      components[j].log_density_rows(rows, terms.col(static_cast<Eigen::Index>(j)));
      terms.col(static_cast<Eigen::Index>(j)).array() += std::log(components[j].weight());
    }
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double hi = terms.row(i).maxCoeff();
      out(i) = std::isfinite(hi) ? hi + std::log((terms.row(i).array() - hi).exp().sum()) : hi;
    }
    return out;
  }
};

inline double gmm_log_density(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.log_density(x);
}

// ---------------------------------------------------------------------------
// Initialization

struct MixtureParameters {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<double> weights;
};

namespace detail {

/// Weighted MLE covariance about `mean`, with a ridge when the effective
/// count cannot support a full-rank estimate.
inline Eigen::MatrixXd weighted_covariance(const Eigen::MatrixXd& data, const Eigen::VectorXd& mean,
                                           const Eigen::VectorXd& resp, double total, bool* regularized = nullptr) {
  const auto k = data.cols();
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.array().colwise() * resp.array()).matrix().transpose() * centered / total;
  cov = 0.5 * (cov + cov.transpose());
  if (total < static_cast<double>(k + 1)) {
    cov.diagonal().array() += kCovarianceRidge;
    if (regularized) *regularized = true;
  }
  return cov;
}

inline Eigen::MatrixXd data_covariance(const Eigen::MatrixXd& data) {
  const Eigen::VectorXd mean = data.colwise().mean().transpose();
  return weighted_covariance(data, mean, Eigen::VectorXd::Ones(data.rows()), static_cast<double>(data.rows()));
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations; returns cluster
/// centroids, per-cluster covariances and cluster fractions.
inline MixtureParameters kmeans_init(const Eigen::MatrixXd& data, std::size_t c, Rng& rng, std::size_t max_iter = 100) {
  const auto s = static_cast<std::size_t>(data.rows());
  if (c == 0) throw ConfigError("component count must be >= 1");
  if (c > s) throw ConfigError("cannot initialize " + std::to_string(c) + " components from " + std::to_string(s) +
                               " samples");
  const auto k = data.cols();
  const auto cc = static_cast<Eigen::Index>(c);

  Eigen::MatrixXd centers(cc, k);
  {
    std::uniform_int_distribution<std::size_t> pick(0, s - 1);
    centers.row(0) = data.row(static_cast<Eigen::Index>(pick(rng)));
    Eigen::VectorXd d2 = (data.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (Eigen::Index j = 1; j < cc; ++j) {
      const double total = d2.sum();
      std::size_t chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        chosen = s - 1;
        for (std::size_t i = 0; i < s; ++i) {
          target -= d2(static_cast<Eigen::Index>(i));
          if (target < 0.0 && d2(static_cast<Eigen::Index>(i)) > 0.0) {
            chosen = i;
            break;
          }
        }
        while (d2(static_cast<Eigen::Index>(chosen)) == 0.0 && chosen > 0) --chosen;
      } else {
        chosen = pick(rng);
      }
      centers.row(j) = data.row(static_cast<Eigen::Index>(chosen));
      d2 = d2.cwiseMin((data.rowwise() - centers.row(j)).rowwise().squaredNorm());
    }
  }

  std::vector<Eigen::Index> assign(s, -1);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    Eigen::MatrixXd dist(static_cast<Eigen::Index>(s), cc);
    for (Eigen::Index j = 0; j < cc; ++j) dist.col(j) = (data.rowwise() - centers.row(j)).rowwise().squaredNorm();
    for (std::size_t i = 0; i < s; ++i) {
      Eigen::Index best = 0;
      dist.row(static_cast<Eigen::Index>(i)).minCoeff(&best);
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(cc, k);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(cc);
    for (std::size_t i = 0; i < s; ++i) {
      sums.row(assign[i]) += data.row(static_cast<Eigen::Index>(i));
      counts(assign[i]) += 1.0;
    }
    for (Eigen::Index j = 0; j < cc; ++j) {
      if (counts(j) > 0.0) {
        centers.row(j) = sums.row(j) / counts(j);
        continue;
      }
      // Empty cluster: move it to the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < s; ++i) {
        const double d = (data.row(static_cast<Eigen::Index>(i)) - centers.row(assign[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(j) = data.row(static_cast<Eigen::Index>(far));
      assign[far] = j;
      changed = true;
    }
  }

  MixtureParameters out;
  for (Eigen::Index j = 0; j < cc; ++j) {
    Eigen::VectorXd member = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s));
    for (std::size_t i = 0; i < s; ++i)
      if (assign[i] == j) member(static_cast<Eigen::Index>(i)) = 1.0;
    const double count = member.sum();
    const Eigen::VectorXd mean = centers.row(j).transpose();
    out.means.push_back(mean);
    if (count > 0.0) {
      out.covariances.push_back(detail::weighted_covariance(data, mean, member, count));
    } else {
      out.covariances.push_back(Eigen::MatrixXd::Identity(k, k) * kCovarianceRidge);
    }
    out.weights.push_back(count / static_cast<double>(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// EM

struct EmOptions {
  std::size_t n_init = 3;
  double tol = 1e-6;
  std::size_t max_iter = 200;
};

namespace detail {

struct EmRun {
  std::vector<GaussianComponent> components;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  GmmDiagnostics diagnostics;
};

inline std::vector<GaussianComponent> make_components(const MixtureParameters& p, bool& regularized) {
  std::vector<GaussianComponent> comps;
  comps.reserve(p.means.size());
  for (std::size_t j = 0; j < p.means.size(); ++j) {
    comps.emplace_back(p.weights[j], p.means[j], p.covariances[j]);
    regularized = regularized || comps.back().regularized();
  }
  return comps;
}

/// Fills responsibilities (s × c) and per-row mixture log-density; returns
/// the total log-likelihood.
inline double e_step(const Eigen::MatrixXd& data, const std::vector<GaussianComponent>& comps, Eigen::MatrixXd& resp,
                     Eigen::VectorXd& row_ll) {
  const auto s = data.rows();
  const auto c = static_cast<Eigen::Index>(comps.size());
  resp.resize(s, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    comps[static_cast<std::size_t>(j)].log_density_rows(data, resp.col(j));
    resp.col(j).array() += std::log(comps[static_cast<std::size_t>(j)].weight());
  }
  const Eigen::VectorXd hi = resp.rowwise().maxCoeff();
  if (!hi.allFinite()) throw NumericalError("point has zero density under every component");
  resp = (resp.colwise() - hi).array().exp().matrix();
  const Eigen::VectorXd sums = resp.rowwise().sum();
  resp.array().colwise() /= sums.array();
  row_ll = hi.array() + sums.array().log();
  return row_ll.sum();
}

inline MixtureParameters m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& resp,
                                const Eigen::VectorXd& row_ll, bool& irregular) {
  const auto s = static_cast<double>(data.rows());
  const auto c = resp.cols();
  const Eigen::VectorXd totals = resp.colwise().sum().transpose();
  MixtureParameters p;
  std::vector<Eigen::Index> worst;  // points by ascending mixture density, filled lazily
  std::size_t reinitialized = 0;
  for (Eigen::Index j = 0; j < c; ++j) {
    if (totals(j) / s < 1.0 / (10.0 * s)) {
      // Collapsed component: restart it on the least explained point.
      if (worst.empty()) {
        worst.resize(static_cast<std::size_t>(data.rows()));
        for (Eigen::Index i = 0; i < data.rows(); ++i) worst[static_cast<std::size_t>(i)] = i;
        std::stable_sort(worst.begin(), worst.end(), [&](auto a, auto b) { return row_ll(a) < row_ll(b); });
      }
      const Eigen::Index at = worst[std::min(reinitialized++, worst.size() - 1)];
      p.means.push_back(data.row(at).transpose());
      p.covariances.push_back(data_covariance(data));
      p.weights.push_back(1.0 / s);
      irregular = true;
      continue;
    }
    const Eigen::VectorXd mean = (data.transpose() * resp.col(j)) / totals(j);
    p.means.push_back(mean);
    p.covariances.push_back(weighted_covariance(data, mean, resp.col(j), totals(j), &irregular));
    p.weights.push_back(totals(j) / s);
  }
  double sum = 0.0;
  for (double w : p.weights) sum += w;
  for (double& w : p.weights) w /= sum;
  return p;
}

inline EmRun run_em(const Eigen::MatrixXd& data, MixtureParameters params, const EmOptions& options) {
  EmRun run;
  Eigen::MatrixXd resp;
  Eigen::VectorXd row_ll;
  bool irregular = false;
  run.components = make_components(params, irregular);
  double ll = e_step(data, run.components, resp, row_ll);
  run.diagnostics.ll_trace.push_back(ll);
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    irregular = false;
    params = m_step(data, resp, row_ll, irregular);
    run.components = make_components(params, irregular);
    const double next = e_step(data, run.components, resp, row_ll);
    run.diagnostics.ll_trace.push_back(next);
    if (irregular) run.diagnostics.irregular_steps.push_back(run.diagnostics.ll_trace.size() - 1);
    ++run.diagnostics.iterations;
    const bool done = std::abs(next - ll) < options.tol;
    ll = next;
    if (done) {
      run.diagnostics.converged = true;
      break;
    }
  }
  if (!std::isfinite(ll)) throw NumericalError("EM produced a non-finite log-likelihood");
  run.log_likelihood = ll;
  return run;
}

}  // namespace detail

/// EM for a c-component full-covariance mixture on `data` (s × k), restarted
/// n_init times from k-means++ initializations; keeps the restart with the
/// highest final log-likelihood.
inline GmmModel em_fit(const Eigen::MatrixXd& data, std::size_t c, const EmOptions& options, Rng& rng) {
  const auto s = static_cast<std::size_t>(data.rows());
  if (c == 0) throw ConfigError("component count must be >= 1");
  if (c > s) throw ConfigError("cannot fit " + std::to_string(c) + " components to " + std::to_string(s) + " samples");
  if (options.n_init == 0) throw ConfigError("n_init must be >= 1");
  if (data.cols() == 0) throw DataError("data has no columns");

  std::optional<detail::EmRun> best;
  std::size_t failed = 0;
  std::string last_error;
  for (std::size_t r = 0; r < options.n_init; ++r) {
    MixtureParameters init = kmeans_init(data, c, rng);
    try {
      auto run = detail::run_em(data, std::move(init), options);
      if (!best || run.log_likelihood > best->log_likelihood) best = std::move(run);
    } catch (const NumericalError& e) {
      ++failed;
      last_error = e.what();
    }
  }
  if (!best) throw NumericalError("all " + std::to_string(options.n_init) + " EM restarts failed: " + last_error);

  GmmModel model;
  model.components = std::move(best->components);
  model.dim = static_cast<std::size_t>(data.cols());
  model.log_likelihood = best->log_likelihood;
  model.nu = degrees_of_freedom(c, model.dim);
  const auto ic = information_criteria(model.log_likelihood, model.nu, s);
  model.aic = ic.aic;
  model.bic = ic.bic;
  model.diagnostics = std::move(best->diagnostics);
  model.diagnostics.failed_restarts = failed;
  return model;
}

struct SelectOptions {
  EmOptions em;
  std::size_t c_max = 32;
};

/// Fits c = 1, 2, ... and returns the model at the first local BIC minimum;
/// equal BIC keeps the smaller c.
inline GmmModel select_components(const Eigen::MatrixXd& data, const SelectOptions& options, Rng& rng) {
  const auto s = static_cast<std::size_t>(data.rows());
  if (s == 0) throw DataError("cannot fit a mixture to zero samples");
  if (options.c_max == 0) throw ConfigError("c_max must be >= 1");
  GmmModel best = em_fit(data, 1, options.em, rng);
  std::vector<double> trace{best.bic};
  for (std::size_t c = 2; c <= std::min(options.c_max, s); ++c) {
    GmmModel candidate;
    try {
      candidate = em_fit(data, c, options.em, rng);
    } catch (const NumericalError&) {
      break;
    }
    trace.push_back(candidate.bic);
    if (candidate.bic >= best.bic) break;
    best = std::move(candidate);
  }
  best.diagnostics.bic_trace = std::move(trace);
  return best;
}

}  // namespace rsmm
