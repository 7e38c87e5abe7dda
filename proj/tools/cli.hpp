#pragma once

// Command-line front end: fit, score, explain, components, bench.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsmm/rsmm.hpp"

namespace rsmm::cli {

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

/// `dir/stem` + suffix for files written next to `path`.
inline std::string sibling(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

struct ModelFlags {
  std::string k = "auto";
  std::string m = "auto";
  double gamma = 0.01;
  std::size_t n_init = 3;
  std::uint64_t seed = 0;
  std::string categorical;
  std::size_t threads = 0;

  void add_to(CLI::App& app) {
    app.add_option("--k", k, "Subspace dimension: integer or auto (2; 2*ceil(mean categories) for all-categorical data)")
        ->capture_default_str();
    app.add_option("--m", m, "Subspace count: integer or auto (3n), snapped to a multiple of LCM(k,n)/k")
        ->capture_default_str();
    app.add_option("--gamma", gamma, "Std of the training noise added in z units")->capture_default_str();
    app.add_option("--n-init", n_init, "EM restarts per component count")->capture_default_str();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--categorical-columns", categorical, "Comma-separated columns to treat as categorical");
    app.add_option("--threads", threads, "Worker threads (0 = all available)")->capture_default_str();
  }

  RsmmConfig config() const {
    RsmmConfig c;
    auto parse_count = [](const std::string& text, const char* flag) -> std::optional<std::size_t> {
      if (text == "auto") return std::nullopt;
      std::size_t value = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size() || value == 0)
        throw CLI::ValidationError(flag, "expected a positive integer or 'auto', got '" + text + "'");
      return value;
    };
    c.k = parse_count(k, "--k");
    c.m = parse_count(m, "--m");
    c.gamma = gamma;
    c.n_init = n_init;
    c.seed = seed;
    c.threads = threads;
    return c;
  }
};

inline Dataset load_for_model(const RsmmModel& model, const std::string& path,
                              const std::optional<std::string>& label_column) {
  CsvOptions opts;
  opts.label_column = label_column;
  for (const auto& c : model.schema)
    if (c.kind == ColumnKind::categorical) opts.categorical_columns.push_back(c.name);
  return load_csv(path, opts);
}

inline void report_warnings(const std::vector<EncodingWarning>& warnings, std::ostream& err) {
  for (const auto& w : warnings)
    err << "warning: row " << w.row << ", column '" << w.column << "': unseen category '" << w.value
        << "' encoded as all zeros\n";
}

}  // namespace detail

/// Runs one invocation. Returns 0 on success, 1 on runtime failure, 2 on bad
/// usage. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random subspace mixture models for interpretable anomaly detection", "rsmm"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV file");
  std::string fit_input, fit_output;
  std::optional<std::string> fit_label;
  bool fit_verbose = false;
  detail::ModelFlags fit_flags;
  fit_cmd->add_option("--input", fit_input, "Training CSV (header row required)")->required();
  fit_cmd->add_option("--output", fit_output, "Model JSON to write")->required();
  fit_cmd->add_option("--label-column", fit_label, "Column excluded from the features");
  fit_cmd->add_flag("--verbose", fit_verbose, "Log one line per fitted subspace to stderr");
  fit_flags.add_to(*fit_cmd);

  // score
  auto* score_cmd = app.add_subcommand("score", "Score rows of a CSV file with a fitted model");
  std::string score_model, score_input, score_output;
  std::optional<std::string> score_label, score_combination;
  score_cmd->add_option("--model", score_model, "Model JSON")->required();
  score_cmd->add_option("--input", score_input, "CSV to score")->required();
  score_cmd->add_option("--output", score_output, "Scores CSV: row_index,log_density,anomaly_score")->required();
  score_cmd->add_option("--label-column", score_label, "Column to ignore");
  score_cmd->add_option("--combination", score_combination, "geometric (default), arithmetic or minimum")
      ->check(CLI::IsMember({"geometric", "arithmetic", "minimum"}));

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Explain why rows are anomalous");
  std::string explain_model, explain_input, explain_output, explain_row;
  std::optional<std::string> explain_label, explain_contours;
  double explain_rate = 0.05;
  std::size_t grid_resolution = 200;
  explain_cmd->add_option("--model", explain_model, "Model JSON")->required();
  explain_cmd->add_option("--input", explain_input, "CSV holding the rows to explain")->required();
  explain_cmd->add_option("--row", explain_row, "Row index, or all-flagged")->required();
  explain_cmd->add_option("--anomaly-rate", explain_rate, "Expected anomaly fraction used for thresholds")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  explain_cmd->add_option("--output", explain_output, "Report JSON to write")->required();
  explain_cmd->add_option("--label-column", explain_label, "Column to ignore");
  explain_cmd->add_option("--contours", explain_contours, "Subspace index or top2: export density grids");
  explain_cmd->add_option("--grid-resolution", grid_resolution, "Grid side length for --contours")
      ->capture_default_str();

  // components
  auto* comp_cmd = app.add_subcommand("components", "Histogram of mixture component counts over subspaces");
  std::string comp_model;
  std::optional<std::string> comp_output;
  comp_cmd->add_option("--model", comp_model, "Model JSON")->required();
  comp_cmd->add_option("--output", comp_output, "Optional CSV: components,subspaces");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Repeated train/test evaluation with ROC-AUC");
  std::string bench_input, bench_label, bench_output, bench_algorithms = "rsmm,full_gmm";
  std::optional<std::string> bench_name;
  std::size_t bench_trials = 10;
  double bench_fraction = 0.6;
  detail::ModelFlags bench_flags;
  bench_cmd->add_option("--input", bench_input, "Labeled CSV")->required();
  bench_cmd->add_option("--label-column", bench_label, "0/1 label column (1 = anomalous)")->required();
  bench_cmd->add_option("--trials", bench_trials, "Number of random splits")->capture_default_str();
  bench_cmd->add_option("--train-fraction", bench_fraction, "Fraction of rows used for training")
      ->capture_default_str();
  bench_cmd->add_option("--algorithms", bench_algorithms, "Comma-separated subset of rsmm,full_gmm")
      ->capture_default_str();
  bench_cmd->add_option("--output", bench_output,
                        "Per-trial results CSV; a <stem>.summary.json is written beside it")
      ->required();
  bench_cmd->add_option("--name", bench_name, "Dataset name in the results (default: input file stem)");
  bench_flags.add_to(*bench_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*fit_cmd) {
      const RsmmConfig config = fit_flags.config();
      CsvOptions opts;
      opts.label_column = fit_label;
      opts.categorical_columns = detail::split_list(fit_flags.categorical);
      Dataset ds = load_csv(fit_input, opts);
      ds.labels.reset();
      SubspaceCallback log;
      if (fit_verbose)
        log = [&err](std::size_t i, const Subspace& s, const GmmModel& g) {
          err << "subspace " << i << " [";
          for (std::size_t j = 0; j < s.size(); ++j) err << (j ? "," : "") << s[j];
          err << "] components=" << g.size() << " bic=" << g.bic << "\n";
        };
      const RsmmModel model = fit(ds, config, log);
      save_model(model, fit_output);
      out << "fitted " << model.m() << " subspaces (n=" << model.n() << ", k=" << model.k() << ") on " << ds.rows()
          << " rows -> " << fit_output << "\n";
    } else if (*score_cmd) {
      const RsmmModel model = load_model(score_model);
      const Dataset ds = detail::load_for_model(model, score_input, score_label);
      std::vector<EncodingWarning> warnings;
      std::optional<Combination> how;
      if (score_combination) how = parse_combination(*score_combination);
      const auto results = score(model, ds, &warnings, how);
      detail::report_warnings(warnings, err);
      auto file = detail::open_output(score_output);
      file.precision(17);
      file << "row_index,log_density,anomaly_score\n";
      for (std::size_t i = 0; i < results.size(); ++i)
        file << i << ',' << results[i].log_density << ',' << results[i].anomaly_score << '\n';
      out << "scored " << results.size() << " rows -> " << score_output << "\n";
    } else if (*explain_cmd) {
      const RsmmModel model = load_model(explain_model);
      const Dataset ds = detail::load_for_model(model, explain_input, explain_label);
      std::vector<EncodingWarning> warnings;
      const auto results = score(model, ds, &warnings);
      detail::report_warnings(warnings, err);
      std::vector<std::size_t> rows;
      if (explain_row == "all-flagged") {
        const double cut = score_threshold(model, explain_rate);
        for (std::size_t i = 0; i < results.size(); ++i)
          if (results[i].log_density < cut) rows.push_back(i);
      } else {
        std::size_t row = 0;
        auto [ptr, ec] = std::from_chars(explain_row.data(), explain_row.data() + explain_row.size(), row);
        if (ec != std::errc() || ptr != explain_row.data() + explain_row.size())
          throw ConfigError("--row expects an index or all-flagged, got '" + explain_row + "'");
        if (row >= results.size())
          throw ConfigError("--row " + explain_row + " is out of range for " + std::to_string(results.size()) +
                            " rows");
        rows.push_back(row);
      }
      auto reports = nlohmann::json::array();
      std::size_t grids = 0;
      for (auto row : rows) {
        const auto report = explain(model, results[row], row, explain_rate);
        reports.push_back(report_to_json(model, report));
        if (!explain_contours) continue;
        std::vector<std::size_t> chosen;
        if (*explain_contours == "top2") {
          for (std::size_t i = 0; i < std::min<std::size_t>(2, report.per_subspace.size()); ++i)
            chosen.push_back(report.per_subspace[i].index);
        } else {
          std::size_t idx = 0;
          const auto& text = *explain_contours;
          auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), idx);
          if (ec != std::errc() || ptr != text.data() + text.size())
            throw ConfigError("--contours expects a subspace index or top2, got '" + text + "'");
          chosen.push_back(idx);
        }
        for (auto sub : chosen) {
          const auto grid = contour_grid(model, sub, std::nullopt, grid_resolution, explain_rate);
          const std::string stem = "_row" + std::to_string(row) + "_subspace" + std::to_string(sub);
          auto csv = detail::open_output(detail::sibling(explain_output, stem + ".csv"));
          write_contour_csv(grid, csv);
          auto sidecar_json = contour_sidecar_json(model, grid);
          sidecar_json["row"] = row;
          sidecar_json["point_log_density"] = results[row].per_subspace_log_density[sub];
          auto sidecar = detail::open_output(detail::sibling(explain_output, stem + ".json"));
          sidecar << sidecar_json.dump(2) << "\n";
          ++grids;
        }
      }
      auto file = detail::open_output(explain_output);
      file << reports.dump(2) << "\n";
      out << "explained " << rows.size() << " rows -> " << explain_output;
      if (grids) out << " (" << grids << " contour grids)";
      out << "\n";
    } else if (*comp_cmd) {
      const RsmmModel model = load_model(comp_model);
      const auto hist = component_histogram(model);
      std::size_t widest = 1;
      for (const auto& [c, count] : hist) widest = std::max(widest, count);
      out << "components  subspaces (m=" << model.m() << ")\n";
      for (const auto& [c, count] : hist) {
        out << std::setw(10) << c << "  " << std::setw(9) << count << "  "
            << std::string(std::max<std::size_t>(1, count * 40 / widest), '#') << "\n";
      }
      if (comp_output) {
        auto file = detail::open_output(*comp_output);
        file << "components,subspaces\n";
        for (const auto& [c, count] : hist) file << c << ',' << count << '\n';
      }
    } else if (*bench_cmd) {
      RsmmConfig config = bench_flags.config();
      CsvOptions opts;
      opts.label_column = bench_label;
      opts.categorical_columns = detail::split_list(bench_flags.categorical);
      const Dataset ds = load_csv(bench_input, opts);
      BenchmarkOptions options;
      options.dataset_name = bench_name.value_or(std::filesystem::path(bench_input).stem().string());
      options.algorithms.clear();
      for (const auto& a : detail::split_list(bench_algorithms)) options.algorithms.push_back(parse_algorithm(a));
      options.trials = bench_trials;
      options.train_fraction = bench_fraction;
      options.seed = config.seed;
      const auto results = run_benchmark(ds, config, options);
      auto csv = detail::open_output(bench_output);
      write_results_csv(results, csv);
      const auto summary = results_summary_json(results);
      auto json_file = detail::open_output(detail::sibling(bench_output, ".summary.json"));
      json_file << summary.dump(2) << "\n";
      for (const auto& r : results)
        out << r.dataset << " " << r.algorithm << ": AUC " << r.mean_auc << " +/- " << r.std_auc << " over "
            << r.trials.size() << " trials (train fraction " << r.train_fraction << ")\n";
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rsmm::cli
