// icd: run one experiment and write its CSV tables, resolved config and
// manifest to an output directory.
//
//   icd train --seed 0,1,2,3,4,5 --out runs/fig3
//   icd context-sweep --ideal --set sweep.prompts=4000
//   icd landscape --config landscape.json

#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "icd/experiments.hpp"
#include "json.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  bool ideal = false;
  bool verbose = false;
  std::vector<std::string> overrides;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::uint64_t v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
      throw icd::ConfigError("--seed", "expected a comma-separated list of non-negative integers");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void emit_error(const std::string& kind, const std::string& field, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  if (!field.empty()) j["field"] = field;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

int run(icd::ExperimentKind kind, const Options& opt) {
  icd::set_log_level(opt.verbose ? icd::LogLevel::Info : icd::LogLevel::Warn);
  icd::ExperimentConfig cfg = opt.config_path.empty()
                                  ? icd::parse_config(kind, "", opt.overrides)
                                  : icd::load_config(kind, opt.config_path, opt.overrides);
  if (!opt.seeds.empty()) cfg.seeds = parse_seeds(opt.seeds);
  if (opt.ideal) cfg.ideal = true;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  const std::filesystem::path dir = icd::default_output_dir(cfg);
  cfg.output_dir = dir.string();
  icd::validate_config(cfg);

  const icd::RunArtifacts art = icd::run_experiment(cfg, dir);
  std::cout << "wrote " << art.files.size() + 1 << " files to " << dir.string() << " in " << art.wall_seconds
            << " s\n";
  for (const auto& f : art.files) std::cout << "  " << f << "\n";
  std::cout << "  manifest.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-context denoising experiments with one-layer attention"};
  app.require_subcommand(1);
  Options opt;

  const std::pair<icd::ExperimentKind, const char*> commands[] = {
      {icd::ExperimentKind::Train, "Train attention weights on denoising prompts (per seed)"},
      {icd::ExperimentKind::ContextSweep, "Test MSE versus context length, with Bayes reference"},
      {icd::ExperimentKind::DimShift, "Evaluate fixed weights on tasks of other subspace dimensions"},
      {icd::ExperimentKind::Landscape, "MSE over a grid of scaled-identity weights"},
      {icd::ExperimentKind::Transform, "Training and plug-in weights under a fixed linear transform"},
      {icd::ExperimentKind::Rates, "Monte-Carlo check of the concentration bounds"},
      {icd::ExperimentKind::EnergyDemo, "Iterated energy descent from the query"},
      {icd::ExperimentKind::BaselineEval, "Evaluate every applicable baseline estimator"},
  };
  std::vector<std::pair<CLI::App*, icd::ExperimentKind>> subs;
  for (const auto& [kind, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(icd::to_string(kind)), help);
    sub->add_option("--config", opt.config_path, "JSON config file layered over the defaults");
    sub->add_option("--out", opt.out_dir, "Output directory (default: $ICD_OUT_DIR/<experiment> or runs/<experiment>)");
    sub->add_option("--seed", opt.seeds, "Seed list, e.g. 0,1,2");
    sub->add_flag("--ideal", opt.ideal, "Skip training and use analytic weights");
    sub->add_option("--set", opt.overrides, "Override a config value: key.path=value (repeatable)")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_flag("-v,--verbose", opt.verbose, "Progress messages on stderr");
    subs.emplace_back(sub, kind);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", "", e.what());
    return 2;
  }

  try {
    for (const auto& [sub, kind] : subs) {
      if (sub->parsed()) return run(kind, opt);
    }
  } catch (const icd::ConfigError& e) {
    emit_error("config", e.field(), e.what());
    return 2;
  } catch (const icd::TrainingError& e) {
    emit_error("training", "", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("runtime", "", e.what());
    return 1;
  }
  return 1;
}
