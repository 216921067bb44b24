#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smallnoise/estimate.hpp"
#include "smallnoise/model.hpp"

namespace smallnoise {

/// Estimators the harness knows about. The label is the plot legend index.
struct EstimatorInfo {
  std::string_view name;
  int label;
};

/// mle (0), cls (1), weighted_beta0 (2), weighted_link (3), small_delta (4),
/// weighted_multiplicative (6; no legend slot of its own).
[[nodiscard]] const std::vector<EstimatorInfo>& estimator_catalog();
[[nodiscard]] int estimator_label(std::string_view name);

struct EstimatorSetup {
  ContrastKind kind = ContrastKind::cls;
  LinkSpec link;
};

/// Contrast kind and link behind a harness estimator name. `beta0` is only read by
/// weighted_beta0. Throws ConfigError for mle and for names the model cannot support.
[[nodiscard]] EstimatorSetup resolve_estimator(std::string_view name, std::string_view model_id, const Vec& beta0);

/// Reporting names of alpha and beta coordinates for a built-in model.
[[nodiscard]] std::vector<std::string> alpha_names(std::string_view model_id);
[[nodiscard]] std::vector<std::string> beta_names(std::string_view model_id);

/// Estimates, intervals, information and optimizer report keyed by parameter name.
[[nodiscard]] nlohmann::json to_json(const EstimationResult& result, std::string_view model_id);

struct ExperimentConfig {
  std::string model;
  Vec alpha0;
  Vec beta0;
  /// SDE models only; SIR starts at (1 - m/N, m/N).
  Vec x0;
  double epsilon = 0.0;
  int population = 0;
  int initial_infected = 0;
  double horizon = 1.0;
  std::vector<int> n_values;
  std::vector<std::string> estimators;
  int replicates = 100;
  /// Replicate count of the original study, kept for provenance only.
  std::optional<int> reference_replicates;
  std::uint64_t base_seed = 1;
  std::string out_dir = "out";
  bool emergence_filter = false;
  double emergence_threshold = 0.10;
  ParamBox alpha_box;
  ParamBox beta_box;
  int sim_substeps = 100;
  int flow_substeps = 16;
  int info_mesh_steps = 1000;
  int max_starts = 27;
  int refine_best = 3;
  int jobs = 1;

  [[nodiscard]] bool is_jump_model() const { return model == "sir"; }
  /// Throws ConfigError on any inconsistency.
  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] static ExperimentConfig from_json(const nlohmann::json& doc);
  [[nodiscard]] static ExperimentConfig load(const std::filesystem::path& file);
};

struct SummaryRow {
  std::string kind;
  int n = 0;
  std::string param;
  double mean = 0.0;
  double sd = 0.0;
  /// Mean theoretical 95% half-width over replicates with an available interval.
  double ci_halfwidth = 0.0;
  /// Fraction of available intervals covering the truth.
  double coverage = 0.0;
  int failures = 0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct McSummary {
  std::vector<SummaryRow> rows;

  [[nodiscard]] const SummaryRow* find(std::string_view kind, int n, std::string_view param) const;
};

/// One estimate of one parameter in one replicate.
struct ReplicateRecord {
  int replicate = 0;
  std::uint64_t stream = 0;
  std::string kind;
  int n = 0;
  std::string param;
  double truth = 0.0;
  double estimate = 0.0;
  Interval ci;
  /// Empty on success, otherwise the error message.
  std::string error;
};

struct ExperimentOutcome {
  McSummary summary;
  std::vector<ReplicateRecord> records;
  /// Replicates attempted, including those dropped by the emergence filter.
  int attempted = 0;
  int filtered_out = 0;
};

/// Runs every replicate and aggregates. Replicate r uses stream r of base_seed; with
/// the emergence filter on, rejected streams are replaced by the next unused stream.
/// Deterministic for any `jobs`. Throws ConfigError on an invalid config.
[[nodiscard]] ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Mean, SD, coverage and failures per (kind, n, param) in config order.
[[nodiscard]] McSummary aggregate(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records);

void write_summary_csv(std::ostream& out, const McSummary& summary);
[[nodiscard]] McSummary read_summary_csv(std::istream& in);

/// Writes summary.csv, summary.json, replicates.csv and ci_plot.csv into out_dir.
void report(const ExperimentOutcome& outcome, const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace smallnoise
