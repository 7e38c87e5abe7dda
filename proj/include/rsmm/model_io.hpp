#pragma once

// JSON persistence for fitted models ("rsmm-model/1").

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include "rsmm/model.hpp"

namespace rsmm {

inline constexpr const char* kModelFormat = "rsmm-model/1";

namespace detail {

using nlohmann::json;

inline json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Eigen::VectorXd json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Row-wise lower triangle.
inline json lower_triangle_json(const Eigen::MatrixXd& a) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) out.push_back(a(i, j));
  return out;
}

inline Eigen::MatrixXd json_lower_triangle(const json& j, Eigen::Index k) {
  const auto values = j.get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(k * (k + 1) / 2))
    throw ModelFormatError("covariance triangle has " + std::to_string(values.size()) + " entries for dimension " +
                           std::to_string(k));
  Eigen::MatrixXd a(k, k);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c <= r; ++c) a(r, c) = a(c, r) = values[at++];
  return a;
}

inline json config_json(const RsmmConfig& c) {
  json j;
  j["k"] = c.k ? json(*c.k) : json("auto");
  j["m"] = c.m ? json(*c.m) : json("auto");
  j["gamma"] = c.gamma;
  j["n_init"] = c.n_init;
  j["seed"] = c.seed;
  j["combination"] = std::string(to_string(c.combination));
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["c_max"] = c.c_max;
  return j;
}

inline RsmmConfig json_config(const json& j) {
  RsmmConfig c;
  if (!j.at("k").is_string()) c.k = j.at("k").get<std::size_t>();
  if (!j.at("m").is_string()) c.m = j.at("m").get<std::size_t>();
  c.gamma = j.at("gamma").get<double>();
  c.n_init = j.at("n_init").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.combination = parse_combination(j.at("combination").get<std::string>());
  c.tol = j.at("tol").get<double>();
  c.max_iter = j.at("max_iter").get<std::size_t>();
  c.c_max = j.at("c_max").get<std::size_t>();
  return c;
}

inline json gmm_json(const GmmModel& g) {
  json comps = json::array();
  for (const auto& c : g.components)
    comps.push_back({{"weight", c.weight()}, {"mean", vector_json(c.mean())},
                     {"covariance_lower", lower_triangle_json(c.covariance())}});
  return {{"dim", g.dim},           {"components", comps}, {"log_likelihood", g.log_likelihood},
          {"nu", g.nu},             {"bic", g.bic},        {"aic", g.aic},
          {"bic_trace", g.diagnostics.bic_trace}};
}

inline GmmModel json_gmm(const json& j) {
  GmmModel g;
  g.dim = j.at("dim").get<std::size_t>();
  for (const auto& c : j.at("components")) {
    Eigen::VectorXd mean = json_vector(c.at("mean"));
    if (static_cast<std::size_t>(mean.size()) != g.dim) throw ModelFormatError("component mean has wrong dimension");
    Eigen::MatrixXd cov = json_lower_triangle(c.at("covariance_lower"), mean.size());
    try {
      g.components.emplace_back(c.at("weight").get<double>(), std::move(mean), std::move(cov));
    } catch (const Error& e) {
      throw ModelFormatError(std::string("invalid component: ") + e.what());
    }
  }
  if (g.components.empty()) throw ModelFormatError("mixture without components");
  g.log_likelihood = j.at("log_likelihood").get<double>();
  g.nu = j.at("nu").get<double>();
  g.bic = j.at("bic").get<double>();
  g.aic = j.at("aic").get<double>();
  g.diagnostics.bic_trace = j.at("bic_trace").get<std::vector<double>>();
  return g;
}

}  // namespace detail

inline nlohmann::json model_to_json(const RsmmModel& model) {
  using nlohmann::json;
  json schema = json::array();
  for (const auto& c : model.schema)
    schema.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}, {"categories", c.categories}});
  json columns = json::array();
  for (const auto& a : model.columns.attributes())
    columns.push_back({{"name", a.name}, {"source", a.source},
                       {"category", a.category ? json(*a.category) : json(nullptr)}});
  json gmms = json::array();
  for (const auto& g : model.gmms) gmms.push_back(detail::gmm_json(g));
  return {{"format", kModelFormat},
          {"config", detail::config_json(model.config)},
          {"schema", schema},
          {"column_map", columns},
          {"standardizer", {{"mu", detail::vector_json(model.standardizer.mu)},
                            {"sigma", detail::vector_json(model.standardizer.sigma)}}},
          {"z_range", {{"min", detail::vector_json(model.z_min)}, {"max", detail::vector_json(model.z_max)}}},
          {"plan", {{"n", model.plan.n}, {"k", model.plan.k}, {"subspaces", model.plan.subspaces}}},
          {"gmms", gmms},
          {"train_log_densities", model.train_log_densities},
          {"train_scores", model.train_scores}};
}

inline RsmmModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format")) throw ModelFormatError("not a model file: missing format field");
  const auto format = j.at("format").get<std::string>();
  if (format != kModelFormat)
    throw ModelFormatError("unsupported model format '" + format + "', expected '" + kModelFormat + "'");
  RsmmModel model;
  try {
    model.config = detail::json_config(j.at("config"));
    for (const auto& c : j.at("schema")) {
      ColumnSchema col;
      col.name = c.at("name").get<std::string>();
      const auto kind = c.at("kind").get<std::string>();
      if (kind != "numeric" && kind != "categorical") throw ModelFormatError("unknown column kind '" + kind + "'");
      col.kind = kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical;
      col.categories = c.at("categories").get<std::vector<std::string>>();
      model.schema.push_back(std::move(col));
    }
    model.columns = ColumnMap(model.schema);
    const auto& map = j.at("column_map");
    if (map.size() != model.columns.size()) throw ModelFormatError("column map does not match schema");
    for (std::size_t a = 0; a < map.size(); ++a)
      if (map[a].at("name").get<std::string>() != model.columns[a].name)
        throw ModelFormatError("column map entry " + std::to_string(a) + " does not match schema");
    model.standardizer.mu = detail::json_vector(j.at("standardizer").at("mu"));
    model.standardizer.sigma = detail::json_vector(j.at("standardizer").at("sigma"));
    model.z_min = detail::json_vector(j.at("z_range").at("min"));
    model.z_max = detail::json_vector(j.at("z_range").at("max"));
    model.plan.n = j.at("plan").at("n").get<std::size_t>();
    model.plan.k = j.at("plan").at("k").get<std::size_t>();
    model.plan.subspaces = j.at("plan").at("subspaces").get<std::vector<Subspace>>();
    for (const auto& g : j.at("gmms")) model.gmms.push_back(detail::json_gmm(g));
    model.train_log_densities = j.at("train_log_densities").get<std::vector<std::vector<double>>>();
    model.train_scores = j.at("train_scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("corrupt model file: ") + e.what());
  }
  const std::size_t n = model.columns.size();
  if (model.standardizer.size() != n || static_cast<std::size_t>(model.standardizer.sigma.size()) != n ||
      static_cast<std::size_t>(model.z_min.size()) != n || static_cast<std::size_t>(model.z_max.size()) != n)
    throw ModelFormatError("standardizer length does not match encoded dimensionality");
  if (model.plan.n != n) throw ModelFormatError("plan dimensionality does not match schema");
  if (const auto problem = validate_plan(model.plan); !problem.empty())
    throw ModelFormatError("invalid subspace plan: " + problem);
  if (model.gmms.size() != model.m() || model.train_log_densities.size() != model.m())
    throw ModelFormatError("mixture count does not match plan");
  for (std::size_t i = 0; i < model.m(); ++i) {
    if (model.gmms[i].dim != model.k()) throw ModelFormatError("mixture " + std::to_string(i) + " has wrong dimension");
    if (model.train_log_densities[i].size() != model.train_scores.size())
      throw ModelFormatError("training density arrays have inconsistent lengths");
  }
  return model;
}

inline std::string serialize_model(const RsmmModel& model) { return model_to_json(model).dump() + "\n"; }

inline RsmmModel deserialize_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelFormatError(std::string("corrupt model file: ") + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const RsmmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model to '" + path + "'");
  out << serialize_model(model);
  if (!out) throw Error("failed writing model to '" + path + "'");
}

inline RsmmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace rsmm
