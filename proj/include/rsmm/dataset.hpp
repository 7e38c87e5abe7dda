#pragma once

// Tabular input: CSV loading, schema inference, one-hot encoding,
// z-standardization and training-noise injection.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rsmm/error.hpp"
#include "rsmm/random.hpp"

namespace rsmm {

enum class ColumnKind { numeric, categorical };

inline std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  /// Category labels in first-appearance order; empty for numeric columns.
  std::vector<std::string> categories;

  std::size_t encoded_width() const { return kind == ColumnKind::numeric ? 1 : categories.size(); }

  std::optional<std::size_t> category_index(std::string_view label) const {
    auto it = std::find(categories.begin(), categories.end(), label);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categories.begin());
  }

  bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

/// One feature column. Numeric columns fill `values`; categorical columns
/// fill `codes`, indices into `schema.categories`.
struct Column {
  ColumnSchema schema;
  std::vector<double> values;
  std::vector<std::uint32_t> codes;

  std::size_t size() const { return schema.kind == ColumnKind::numeric ? values.size() : codes.size(); }
};

struct Dataset {
  std::vector<Column> columns;
  /// 1 = anomalous, 0 = normal.
  std::optional<std::vector<int>> labels;

  std::size_t rows() const { return columns.empty() ? (labels ? labels->size() : 0) : columns.front().size(); }

  /// Encoded dimensionality after one-hot expansion.
  std::size_t encoded_dim() const {
    std::size_t n = 0;
    for (const auto& c : columns) n += c.schema.encoded_width();
    return n;
  }

  Schema schema() const {
    Schema out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.schema);
    return out;
  }

  const Column* find(std::string_view name) const {
    for (const auto& c : columns)
      if (c.schema.name == name) return &c;
    return nullptr;
  }

  /// Rows selected by `indices`, in that order. Schemas (and category lists)
  /// are kept from the parent so encodings stay aligned.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.columns.reserve(columns.size());
    for (const auto& c : columns) {
      Column sub{c.schema, {}, {}};
      if (c.schema.kind == ColumnKind::numeric) {
        sub.values.reserve(indices.size());
        for (auto i : indices) sub.values.push_back(c.values.at(i));
      } else {
        sub.codes.reserve(indices.size());
        for (auto i : indices) sub.codes.push_back(c.codes.at(i));
      }
      out.columns.push_back(std::move(sub));
    }
    if (labels) {
      std::vector<int> l;
      l.reserve(indices.size());
      for (auto i : indices) l.push_back(labels->at(i));
      out.labels = std::move(l);
    }
    return out;
  }

  /// All-numeric dataset from a row-major sample matrix. Columns are named
  /// x0, x1, ... unless `names` is given.
  static Dataset from_matrix(const Eigen::MatrixXd& data, std::optional<std::vector<int>> labels = std::nullopt,
                             std::vector<std::string> names = {}) {
    if (names.empty())
      for (Eigen::Index j = 0; j < data.cols(); ++j) names.push_back("x" + std::to_string(j));
    if (static_cast<Eigen::Index>(names.size()) != data.cols())
      throw DataError("from_matrix: " + std::to_string(names.size()) + " names for " + std::to_string(data.cols()) +
                      " columns");
    if (labels && static_cast<Eigen::Index>(labels->size()) != data.rows())
      throw DataError("from_matrix: label count does not match row count");
    Dataset ds;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      Column col{{names[j], ColumnKind::numeric, {}}, {}, {}};
      col.values.assign(data.col(j).data(), data.col(j).data() + data.rows());
      ds.columns.push_back(std::move(col));
    }
    ds.labels = std::move(labels);
    return ds;
  }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Splits one logical CSV record. Quoted fields may contain commas, doubled
/// quotes and newlines; `in` is read further when a quote spans lines.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  std::size_t i = 0;
  for (;;) {
    if (i == line.size()) {
      if (quoted) {
        std::string more;
        if (!std::getline(in, more)) throw DataError("unterminated quoted field at line " + std::to_string(line_no));
        ++line_no;
        field.push_back('\n');
        line = std::move(more);
        i = 0;
        continue;
      }
      break;
    }
    const char ch = line[i++];
    if (quoted) {
      if (ch == '"') {
        if (i < line.size() && line[i] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(ch);
    }
  }
  if (!was_quoted && !field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return true;
}

enum class NumberParse { ok, not_a_number, non_finite };

inline NumberParse parse_number(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return NumberParse::not_a_number;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) return NumberParse::not_a_number;
  return std::isfinite(out) ? NumberParse::ok : NumberParse::non_finite;
}

}  // namespace detail

struct CsvOptions {
  std::optional<std::string> label_column;
  /// Columns forced categorical regardless of content.
  std::vector<std::string> categorical_columns;
};

/// Parses CSV text with a header row. A column is categorical when declared
/// so, or when any of its cells is not a number.
inline Dataset read_csv(std::istream& in, const CsvOptions& options = {}) {
  std::size_t line_no = 0;
  std::vector<std::string> header;
  if (!detail::read_csv_record(in, header, line_no)) throw DataError("empty CSV: no header row");
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
      if (h.empty()) throw DataError("empty column name in header");
      if (!seen.insert(h).second) throw DataError("duplicate column name '" + h + "'");
    }
  }
  std::optional<std::size_t> label_idx;
  if (options.label_column) {
    auto it = std::find(header.begin(), header.end(), *options.label_column);
    if (it == header.end()) throw DataError("label column '" + *options.label_column + "' not found in header");
    label_idx = static_cast<std::size_t>(it - header.begin());
  }
  for (const auto& name : options.categorical_columns)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw DataError("categorical column '" + name + "' not found in header");

  std::vector<std::vector<std::string>> cells(header.size());
  std::vector<std::size_t> record_lines;
  std::vector<std::string> fields;
  while (detail::read_csv_record(in, fields, line_no)) {
    if (fields.size() == 1 && fields.front().empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (fields[j].empty())
        throw DataError("missing value at line " + std::to_string(line_no) + ", column '" + header[j] + "'");
      cells[j].push_back(std::move(fields[j]));
    }
    record_lines.push_back(line_no);
  }
  const std::size_t s = record_lines.size();
  if (s == 0) throw DataError("CSV has a header but no data rows");

  Dataset ds;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (label_idx && j == *label_idx) {
      std::vector<int> labels(s);
      for (std::size_t i = 0; i < s; ++i) {
        double v = 0;
        if (detail::parse_number(cells[j][i], v) != detail::NumberParse::ok || (v != 0.0 && v != 1.0))
          throw DataError("label at line " + std::to_string(record_lines[i]) + " is '" + cells[j][i] +
                          "'; expected 0 or 1");
        labels[i] = v == 1.0 ? 1 : 0;
      }
      ds.labels = std::move(labels);
      continue;
    }
    const bool declared = std::find(options.categorical_columns.begin(), options.categorical_columns.end(),
                                    header[j]) != options.categorical_columns.end();
    Column col{{header[j], ColumnKind::numeric, {}}, {}, {}};
    bool numeric = !declared;
    if (numeric) {
      col.values.resize(s);
      for (std::size_t i = 0; i < s; ++i) {
        const auto r = detail::parse_number(cells[j][i], col.values[i]);
        if (r == detail::NumberParse::non_finite)
          throw DataError("non-finite value '" + cells[j][i] + "' at line " + std::to_string(record_lines[i]) +
                          ", column '" + header[j] + "'");
        if (r == detail::NumberParse::not_a_number) {
          numeric = false;
          break;
        }
      }
    }
    if (!numeric) {
      col.values.clear();
      col.schema.kind = ColumnKind::categorical;
      std::unordered_map<std::string, std::uint32_t> index;
      col.codes.resize(s);
      for (std::size_t i = 0; i < s; ++i) {
        auto [it, inserted] = index.try_emplace(cells[j][i], static_cast<std::uint32_t>(col.schema.categories.size()));
        if (inserted) col.schema.categories.push_back(cells[j][i]);
        col.codes[i] = it->second;
      }
    }
    ds.columns.push_back(std::move(col));
  }
  if (ds.columns.empty()) throw DataError("CSV has no feature columns");
  return ds;
}

inline Dataset load_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, options);
}

// ---------------------------------------------------------------------------
// One-hot encoding

struct EncodedAttribute {
  std::size_t source = 0;                 ///< index of the source column
  std::optional<std::size_t> category;    ///< category index for indicator attributes
  std::string name;                       ///< "col" or "col=label"
};

/// Reversible map between source columns and encoded attribute indices.
class ColumnMap {
 public:
  ColumnMap() = default;

  explicit ColumnMap(const Schema& schema) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      offsets_.push_back(attributes_.size());
      const auto& col = schema[c];
      if (col.kind == ColumnKind::numeric) {
        attributes_.push_back({c, std::nullopt, col.name});
      } else {
        if (col.categories.empty()) throw DataError("categorical column '" + col.name + "' has no categories");
        for (std::size_t k = 0; k < col.categories.size(); ++k)
          attributes_.push_back({c, k, col.name + "=" + col.categories[k]});
      }
    }
    offsets_.push_back(attributes_.size());
  }

  std::size_t size() const { return attributes_.size(); }
  std::size_t source_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  const EncodedAttribute& operator[](std::size_t j) const { return attributes_.at(j); }
  const std::vector<EncodedAttribute>& attributes() const { return attributes_; }
  std::size_t offset(std::size_t source) const { return offsets_.at(source); }
  std::size_t width(std::size_t source) const { return offsets_.at(source + 1) - offsets_.at(source); }

 private:
  std::vector<EncodedAttribute> attributes_;
  std::vector<std::size_t> offsets_;
};

/// A categorical value at score time that the fitted schema never saw.
struct EncodingWarning {
  std::size_t row = 0;
  std::string column;
  std::string value;
};

struct EncodedMatrix {
  Eigen::MatrixXd values;  ///< s × n
  ColumnMap map;
};

/// Encodes `ds` with its own schema: numeric columns pass through, each
/// categorical column expands to one 0/1 indicator per category.
inline EncodedMatrix one_hot_encode(const Dataset& ds) {
  EncodedMatrix out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.rows()),
                                          static_cast<Eigen::Index>(ds.encoded_dim())),
                    ColumnMap(ds.schema())};
  for (std::size_t c = 0; c < ds.columns.size(); ++c) {
    const auto& col = ds.columns[c];
    const auto off = static_cast<Eigen::Index>(out.map.offset(c));
    if (col.schema.kind == ColumnKind::numeric) {
      for (std::size_t i = 0; i < col.values.size(); ++i) out.values(static_cast<Eigen::Index>(i), off) = col.values[i];
    } else {
      for (std::size_t i = 0; i < col.codes.size(); ++i)
        out.values(static_cast<Eigen::Index>(i), off + static_cast<Eigen::Index>(col.codes[i])) = 1.0;
    }
  }
  return out;
}

/// Encodes `ds` under a previously fitted `schema`, matching columns by name.
/// Categories unknown to `schema` become an all-zero indicator block and are
/// reported through `warnings`.
inline Eigen::MatrixXd encode_with_schema(const Schema& schema, const Dataset& ds,
                                          std::vector<EncodingWarning>* warnings = nullptr) {
  const ColumnMap map(schema);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.rows()), static_cast<Eigen::Index>(map.size()));
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& want = schema[c];
    const Column* col = ds.find(want.name);
    if (!col) throw DataError("input is missing column '" + want.name + "'");
    const auto off = static_cast<Eigen::Index>(map.offset(c));
    if (want.kind == ColumnKind::numeric) {
      if (col->schema.kind != ColumnKind::numeric)
        throw DataError("column '" + want.name + "' was numeric at fit time but holds non-numeric values");
      for (std::size_t i = 0; i < col->values.size(); ++i) out(static_cast<Eigen::Index>(i), off) = col->values[i];
      continue;
    }
    if (col->schema.kind != ColumnKind::categorical)
      throw DataError("column '" + want.name + "' was categorical at fit time; load it as categorical");
    std::vector<std::optional<std::size_t>> translate;
    translate.reserve(col->schema.categories.size());
    for (const auto& label : col->schema.categories) translate.push_back(want.category_index(label));
    for (std::size_t i = 0; i < col->codes.size(); ++i) {
      const auto& target = translate.at(col->codes[i]);
      if (target) {
        out(static_cast<Eigen::Index>(i), off + static_cast<Eigen::Index>(*target)) = 1.0;
      } else if (warnings) {
        warnings->push_back({i, want.name, col->schema.categories[col->codes[i]]});
      }
    }
  }
  for (const auto& col : ds.columns) {
    bool known = std::any_of(schema.begin(), schema.end(), [&](const ColumnSchema& c) { return c.name == col.schema.name; });
    if (!known) throw DataError("input has column '" + col.schema.name + "' that the model was not fitted on");
  }
  return out;
}

/// Inverse of the indicator expansion for one categorical source column: the
/// category index whose indicator is set, or nullopt for an all-zero block.
inline std::optional<std::size_t> decode_category(const ColumnMap& map, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                                  std::size_t source) {
  const auto off = map.offset(source);
  for (std::size_t k = 0; k < map.width(source); ++k)
    if (row(static_cast<Eigen::Index>(off + k)) > 0.5) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Standardization and noise

struct Standardizer {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  ///< population standard deviation, never zero

  std::size_t size() const { return static_cast<std::size_t>(mu.size()); }
};

/// Column means and population standard deviations; constant columns get
/// sigma = 1.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) throw DataError("fit_standardizer needs at least 2 rows, got " + std::to_string(data.rows()));
  Standardizer st;
  const double s = static_cast<double>(data.rows());
  st.mu = data.colwise().mean().transpose();
  st.sigma.resize(data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double var = (data.col(j).array() - st.mu(j)).square().sum() / s;
    const double sd = std::sqrt(var);
    st.sigma(j) = sd <= 1e-12 * std::max(1.0, std::abs(st.mu(j))) ? 1.0 : sd;
  }
  return st;
}

inline Eigen::MatrixXd apply_standardizer(const Standardizer& st, const Eigen::MatrixXd& data) {
  if (static_cast<std::size_t>(data.cols()) != st.size())
    throw DataError("standardizer expects " + std::to_string(st.size()) + " columns, got " +
                    std::to_string(data.cols()));
  return ((data.rowwise() - st.mu.transpose()).array().rowwise() / st.sigma.transpose().array()).matrix();
}

/// Adds independent N(0, gamma) noise to every entry, drawn in column-major
/// order. gamma = 0 returns the input unchanged and draws nothing.
inline Eigen::MatrixXd add_noise(Eigen::MatrixXd data, double gamma, Rng& rng) {
  if (!(gamma >= 0.0)) throw ConfigError("noise gamma must be >= 0");
  if (gamma == 0.0) return data;
  std::normal_distribution<double> noise(0.0, gamma);
  double* p = data.data();
  for (Eigen::Index i = 0; i < data.size(); ++i) p[i] += noise(rng);
  return data;
}

}  // namespace rsmm
