#pragma once

// Per-point explanations: per-subspace decision thresholds derived from an
// anomaly rate, predicted-anomalous / predicted-normal (PA/PN) counts per
// attribute, subspaces ranked by training percentile, and 2-D density grids.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rsmm/model.hpp"

namespace rsmm {

/// Lower empirical `rate`-quantile of a sorted sample: the order statistic at
/// index ⌈rate·s⌉−1 (clamped); -inf when rate = 0.
inline double lower_quantile(std::span<const double> sorted, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("anomaly rate must lie in [0, 1]");
  if (sorted.empty()) throw ConfigError("cannot take a quantile of an empty sample");
  if (rate == 0.0) return -std::numeric_limits<double>::infinity();
  const double pos = std::ceil(rate * static_cast<double>(sorted.size())) - 1.0;
  const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

/// Fraction of the sorted training sample strictly below `value`.
inline double training_percentile(std::span<const double> sorted, double value) {
  if (sorted.empty()) throw ConfigError("empty training sample");
  const auto below = std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin();
  return static_cast<double>(below) / static_cast<double>(sorted.size());
}

/// Per-subspace log-density thresholds; a point is flagged in subspace i when
/// its log-density there is strictly below thresholds[i].
inline std::vector<double> subspace_thresholds(const RsmmModel& model, double anomaly_rate) {
  std::vector<double> out;
  out.reserve(model.m());
  for (const auto& sorted : model.train_log_densities) out.push_back(lower_quantile(sorted, anomaly_rate));
  return out;
}

/// Threshold on the combined (geometric) log-density at the same rate.
inline double score_threshold(const RsmmModel& model, double anomaly_rate) {
  return lower_quantile(model.train_scores, anomaly_rate);
}

struct AttributeAttribution {
  std::string attribute;
  std::vector<std::size_t> encoded;  ///< encoded attribute indices covered
  std::size_t pa = 0;                ///< containing subspaces that flag the point
  std::size_t pn = 0;                ///< containing subspaces that do not
};

struct SubspaceAssessment {
  std::size_t index = 0;
  Subspace attributes;
  double log_density = 0.0;
  double percentile = 0.0;
  double threshold = 0.0;
  bool flagged = false;
};

struct ExplanationReport {
  std::size_t point_id = 0;
  double log_density = 0.0;
  double anomaly_score = 0.0;
  double anomaly_rate_used = 0.0;
  std::vector<AttributeAttribution> per_attribute;          ///< aggregated to source columns
  std::vector<AttributeAttribution> per_encoded_attribute;  ///< one entry per encoded attribute
  std::vector<SubspaceAssessment> per_subspace;             ///< ascending percentile
};

namespace detail {

inline void check_point(const RsmmModel& model, std::span<const double> per_subspace) {
  if (per_subspace.size() != model.m())
    throw DataError("point has " + std::to_string(per_subspace.size()) + " subspace densities, model has " +
                    std::to_string(model.m()) + " subspaces");
}

inline void sort_attributions(std::vector<AttributeAttribution>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.pa != b.pa) return a.pa > b.pa;
    if (a.pn != b.pn) return a.pn < b.pn;
    return a.encoded.front() < b.encoded.front();
  });
}

}  // namespace detail

/// PA/PN counts per encoded attribute, or per source column when
/// `aggregate_sources` is set (indicator blocks summed). Sorted by descending
/// PA, then ascending PN, then attribute index.
inline std::vector<AttributeAttribution> attribute_attribution(const RsmmModel& model,
                                                               std::span<const double> per_subspace,
                                                               std::span<const double> thresholds,
                                                               bool aggregate_sources = true) {
  detail::check_point(model, per_subspace);
  if (thresholds.size() != model.m()) throw ConfigError("threshold count does not match subspace count");
  std::vector<std::size_t> pa(model.n(), 0);
  std::vector<std::size_t> pn(model.n(), 0);
  for (std::size_t i = 0; i < model.m(); ++i) {
    const bool flagged = per_subspace[i] < thresholds[i];
    for (auto a : model.plan.subspaces[i]) ++(flagged ? pa : pn)[a];
  }
  std::vector<AttributeAttribution> rows;
  if (aggregate_sources) {
    for (std::size_t c = 0; c < model.columns.source_count(); ++c) {
      AttributeAttribution row{model.schema.at(c).name, {}, 0, 0};
      for (std::size_t j = 0; j < model.columns.width(c); ++j) {
        const auto a = model.columns.offset(c) + j;
        row.encoded.push_back(a);
        row.pa += pa[a];
        row.pn += pn[a];
      }
      rows.push_back(std::move(row));
    }
  } else {
    for (std::size_t a = 0; a < model.n(); ++a) rows.push_back({model.columns[a].name, {a}, pa[a], pn[a]});
  }
  detail::sort_attributions(rows);
  return rows;
}

/// Subspaces sorted by ascending training percentile of the point's
/// log-density; ties keep subspace order.
inline std::vector<SubspaceAssessment> rank_subspaces(const RsmmModel& model, std::span<const double> per_subspace,
                                                      std::span<const double> thresholds = {}) {
  detail::check_point(model, per_subspace);
  std::vector<SubspaceAssessment> out;
  out.reserve(model.m());
  for (std::size_t i = 0; i < model.m(); ++i) {
    SubspaceAssessment a;
    a.index = i;
    a.attributes = model.plan.subspaces[i];
    a.log_density = per_subspace[i];
    a.percentile = training_percentile(model.train_log_densities[i], per_subspace[i]);
    a.threshold = thresholds.empty() ? -std::numeric_limits<double>::infinity() : thresholds[i];
    a.flagged = per_subspace[i] < a.threshold;
    out.push_back(std::move(a));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.percentile < y.percentile; });
  return out;
}

inline ExplanationReport explain(const RsmmModel& model, const ScoreResult& point, std::size_t point_id,
                                 double anomaly_rate) {
  const auto thresholds = subspace_thresholds(model, anomaly_rate);
  ExplanationReport report;
  report.point_id = point_id;
  report.log_density = point.log_density;
  report.anomaly_score = point.anomaly_score;
  report.anomaly_rate_used = anomaly_rate;
  report.per_attribute = attribute_attribution(model, point.per_subspace_log_density, thresholds, true);
  report.per_encoded_attribute = attribute_attribution(model, point.per_subspace_log_density, thresholds, false);
  report.per_subspace = rank_subspaces(model, point.per_subspace_log_density, thresholds);
  return report;
}

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json attribution_json(const std::vector<AttributeAttribution>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"attribute", r.attribute}, {"encoded", r.encoded}, {"pa", r.pa}, {"pn", r.pn}});
  return out;
}

}  // namespace detail

inline nlohmann::json report_to_json(const RsmmModel& model, const ExplanationReport& report) {
  auto subspaces = nlohmann::json::array();
  for (const auto& s : report.per_subspace) {
    std::vector<std::string> names;
    for (auto a : s.attributes) names.push_back(model.columns[a].name);
    subspaces.push_back({{"subspace", s.index},
                         {"indices", s.attributes},
                         {"attributes", names},
                         {"log_density", s.log_density},
                         {"percentile", s.percentile},
                         {"threshold", detail::finite_or_null(s.threshold)},
                         {"flagged", s.flagged}});
  }
  return {{"point_id", report.point_id},
          {"log_density", report.log_density},
          {"anomaly_score", report.anomaly_score},
          {"anomaly_rate_used", report.anomaly_rate_used},
          {"per_attribute", detail::attribution_json(report.per_attribute)},
          {"per_encoded_attribute", detail::attribution_json(report.per_encoded_attribute)},
          {"per_subspace", subspaces}};
}

// ---------------------------------------------------------------------------
// Contour grids

struct Box2 {
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
};

struct ContourGrid {
  std::size_t subspace = 0;
  Subspace attributes;
  Box2 bounds;  ///< z units
  std::size_t resolution = 0;
  std::vector<double> xs;
  std::vector<double> ys;
  /// log_density[iy * resolution + ix], guarded.
  std::vector<double> log_density;
  double threshold = 0.0;
  double anomaly_rate = 0.0;

  double at(std::size_t ix, std::size_t iy) const { return log_density.at(iy * resolution + ix); }
  double cell_area() const {
    return (bounds.x_hi - bounds.x_lo) / static_cast<double>(resolution - 1) *
           ((bounds.y_hi - bounds.y_lo) / static_cast<double>(resolution - 1));
  }
};

/// Evaluates a 2-D subspace mixture on a resolution × resolution lattice
/// including the box edges. Without explicit bounds the box is the training
/// range ± 3 in z units.
inline ContourGrid contour_grid(const RsmmModel& model, std::size_t subspace, std::optional<Box2> bounds,
                                std::size_t resolution, double anomaly_rate) {
  if (subspace >= model.m()) throw ConfigError("subspace index " + std::to_string(subspace) + " out of range");
  const auto& attrs = model.plan.subspaces[subspace];
  if (attrs.size() != 2) throw ConfigError("contour grids need a 2-dimensional subspace, got k=" +
                                           std::to_string(attrs.size()));
  if (resolution < 2) throw ConfigError("grid resolution must be >= 2");
  ContourGrid grid;
  grid.subspace = subspace;
  grid.attributes = attrs;
  grid.resolution = resolution;
  grid.anomaly_rate = anomaly_rate;
  grid.threshold = lower_quantile(model.train_log_densities[subspace], anomaly_rate);
  if (bounds) {
    grid.bounds = *bounds;
  } else {
    const auto x = static_cast<Eigen::Index>(attrs[0]);
    const auto y = static_cast<Eigen::Index>(attrs[1]);
    grid.bounds = {model.z_min(x) - 3.0, model.z_max(x) + 3.0, model.z_min(y) - 3.0, model.z_max(y) + 3.0};
  }
  if (!(grid.bounds.x_hi > grid.bounds.x_lo) || !(grid.bounds.y_hi > grid.bounds.y_lo))
    throw ConfigError("grid bounds must have positive extent");
  const auto res = static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i) {
    grid.xs.push_back(grid.bounds.x_lo + (grid.bounds.x_hi - grid.bounds.x_lo) * static_cast<double>(i) / res);
    grid.ys.push_back(grid.bounds.y_lo + (grid.bounds.y_hi - grid.bounds.y_lo) * static_cast<double>(i) / res);
  }
  Eigen::MatrixXd points(static_cast<Eigen::Index>(resolution * resolution), 2);
  for (std::size_t iy = 0; iy < resolution; ++iy)
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      const auto row = static_cast<Eigen::Index>(iy * resolution + ix);
      points(row, 0) = grid.xs[ix];
      points(row, 1) = grid.ys[iy];
    }
  const Eigen::VectorXd d = subspace_log_densities(model.gmms[subspace], points);
  grid.log_density.assign(d.data(), d.data() + d.size());
  return grid;
}

/// x,y,log_density triples, one lattice point per line.
inline void write_contour_csv(const ContourGrid& grid, std::ostream& out) {
  out << "x,y,log_density\n";
  out.precision(17);
  for (std::size_t iy = 0; iy < grid.resolution; ++iy)
    for (std::size_t ix = 0; ix < grid.resolution; ++ix)
      out << grid.xs[ix] << ',' << grid.ys[iy] << ',' << grid.at(ix, iy) << '\n';
}

inline nlohmann::json contour_sidecar_json(const RsmmModel& model, const ContourGrid& grid) {
  std::vector<std::string> names;
  for (auto a : grid.attributes) names.push_back(model.columns[a].name);
  return {{"subspace", grid.subspace},
          {"indices", grid.attributes},
          {"attributes", names},
          {"bounds", {{"x", {grid.bounds.x_lo, grid.bounds.x_hi}}, {"y", {grid.bounds.y_lo, grid.bounds.y_hi}}}},
          {"units", "z"},
          {"resolution", grid.resolution},
          {"anomaly_rate", grid.anomaly_rate},
          {"threshold", detail::finite_or_null(grid.threshold)}};
}

}  // namespace rsmm
