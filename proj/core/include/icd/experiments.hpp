#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icd/config.hpp"
#include "icd/csv.hpp"

namespace icd {

/// What one run produced. With an empty `directory` nothing is written and
/// the tables are only kept in memory.
struct RunArtifacts {
  std::filesystem::path directory;
  /// Written files in emission order (manifest.json itself excluded).
  std::vector<std::string> files;
  std::map<std::string, CsvTable> tables;
  double wall_seconds = 0.0;
};

/// cfg.output_dir if set, else $ICD_OUT_DIR/<experiment>, else runs/<experiment>.
std::filesystem::path default_output_dir(const ExperimentConfig& cfg);

/// Validates, then dispatches on cfg.experiment.
RunArtifacts run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

RunArtifacts run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_context_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_dim_shift(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_landscape(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_transform(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_rates(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_energy_demo(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunArtifacts run_baseline_eval(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Analytic weights for a task: linear attention with alpha beta =
/// 1/(s0^2 + sZ^2) for the linear case, softmax with (1, 1/sZ^2) otherwise.
AttentionWeights ideal_weights(const TaskSpec& spec);

/// (alpha, beta) of ideal_weights.
std::pair<double, double> ideal_scales(const TaskSpec& spec);

/// Posterior mean matching the task's case.
Vector bayes_predict(const TaskInstance& task, const Vector& query);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Reads pv/kq for one seed from a weights_final.csv-style table.
AttentionWeights weights_from_table(const CsvTable& table, AttentionKind kind, std::uint64_t seed);

}  // namespace icd
