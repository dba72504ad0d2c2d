#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icd/attention.hpp"
#include "icd/training.hpp"

namespace icd {

enum class ExperimentKind {
  Train,
  ContextSweep,
  DimShift,
  Landscape,
  Transform,
  Rates,
  EnergyDemo,
  BaselineEval,
};

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(std::string_view name);

/// A configuration problem, reported before any computation starts.
/// `field()` is the dotted path of the offending key ("train.batch_size").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Evenly spaced grid, endpoints included.
struct Grid {
  double min = 0.0;
  double max = 1.0;
  Index points = 2;

  std::vector<double> values() const;
  bool operator==(const Grid&) const = default;
};

struct SweepSettings {
  std::vector<Index> context_lengths{16, 64, 256, 1024};
  Index prompts = 2000;
  bool operator==(const SweepSettings&) const = default;
};

struct DimShiftSettings {
  std::vector<Index> d_infer{2, 4, 8, 12, 15};
  std::vector<Index> context_lengths{100, 500, 2000};
  Index prompts = 1000;
  /// Optional weights file (weights_final.csv schema); trains when empty.
  std::string weights_csv;
  bool operator==(const DimShiftSettings&) const = default;
};

struct LandscapeSettings {
  Grid alpha{-2.0, 2.0, 50};
  Grid beta{-20.0, 20.0, 50};
  Index prompts = 2000;
  Index context_length = 500;
  bool operator==(const LandscapeSettings&) const = default;
};

struct TransformSettings {
  double scale = 0.5;
  double max_condition = 3.0;
  double alpha = 1.0;
  bool operator==(const TransformSettings&) const = default;
};

struct RatesSettings {
  Index trials = 500;
  double delta = 0.1;
  std::vector<Index> context_lengths{200};
  Index reference_factor = 100;
  Index prop6_d = 8;
  double prop6_sigma0_sq = 2.0;
  bool operator==(const RatesSettings&) const = default;
};

struct EnergySettings {
  Index context_length = 20;
  Index prompts = 1000;
  Index steps = 20;
  double alpha = 1.0;
  /// 0 selects 1/sigmaZ^2.
  double beta = 0.0;
  /// 0 selects gamma = alpha.
  double gamma = 0.0;
  Index trajectory_files = 5;
  bool operator==(const EnergySettings&) const = default;
};

struct BaselineSettings {
  Index prompts = 10000;
  Index context_length = 500;
  bool operator==(const BaselineSettings&) const = default;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Train;
  TaskSpec task;
  AttentionKind attention = AttentionKind::Linear;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  bool ideal = false;
  std::string output_dir;

  SweepSettings sweep;
  DimShiftSettings dim_shift;
  LandscapeSettings landscape;
  TransformSettings transform;
  RatesSettings rates;
  EnergySettings energy;
  BaselineSettings baseline;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Defaults for each experiment (task parameters follow the corresponding
/// figure: Case 1 n=16 d=8 for train/sweeps, Case 2 for landscape, rates and
/// the energy demo).
ExperimentConfig default_config(ExperimentKind kind);

/// Builds a config from JSON text layered over default_config(kind), then
/// applies `overrides` ("key.path=value"). Unknown keys and type mismatches
/// raise ConfigError. Does not call validate_config.
ExperimentConfig parse_config(ExperimentKind kind, std::string_view json_text,
                              const std::vector<std::string>& overrides = {});

ExperimentConfig load_config(ExperimentKind kind, const std::string& path,
                             const std::vector<std::string>& overrides = {});

/// Full resolved configuration as pretty-printed JSON; parse_config of the
/// result gives back an equal ExperimentConfig.
std::string to_json(const ExperimentConfig& cfg);

/// Checks every field the selected experiment uses; throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

}  // namespace icd
