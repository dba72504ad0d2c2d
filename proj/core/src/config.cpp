#include "icd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace icd {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::pair<ExperimentKind, std::string_view> kExperimentNames[] = {
    {ExperimentKind::Train, "train"},
    {ExperimentKind::ContextSweep, "context-sweep"},
    {ExperimentKind::DimShift, "dim-shift"},
    {ExperimentKind::Landscape, "landscape"},
    {ExperimentKind::Transform, "transform"},
    {ExperimentKind::Rates, "rates"},
    {ExperimentKind::EnergyDemo, "energy-demo"},
    {ExperimentKind::BaselineEval, "baseline-eval"},
};

Json grid_json(const Grid& g) { return Json{{"min", g.min}, {"max", g.max}, {"points", g.points}}; }

Json task_json(const TaskSpec& t) {
  return Json{{"case", std::string(to_string(t.task_case))},
              {"n", t.n},
              {"d", t.d},
              {"k", t.k},
              {"radius", t.radius},
              {"sigma0_sq", t.sigma0_sq},
              {"sigmaZ_sq", t.sigmaZ_sq},
              {"weights", t.weights},
              {"component_sigma_sq", t.component_sigma_sq}};
}

Json train_json(const TrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"dataset_size", c.dataset_size},
              {"context_length", c.context_length},
              {"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"eval_prompts", c.eval_prompts},
              {"record_every", c.record_every}};
}

Json config_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = std::string(to_string(c.experiment));
  j["task"] = task_json(c.task);
  j["attention"] = std::string(to_string(c.attention));
  j["train"] = train_json(c.train);
  j["seeds"] = c.seeds;
  j["ideal"] = c.ideal;
  j["output_dir"] = c.output_dir;
  j["sweep"] = Json{{"context_lengths", c.sweep.context_lengths}, {"prompts", c.sweep.prompts}};
  j["dim_shift"] = Json{{"d_infer", c.dim_shift.d_infer},
                        {"context_lengths", c.dim_shift.context_lengths},
                        {"prompts", c.dim_shift.prompts},
                        {"weights_csv", c.dim_shift.weights_csv}};
  j["landscape"] = Json{{"alpha", grid_json(c.landscape.alpha)},
                        {"beta", grid_json(c.landscape.beta)},
                        {"prompts", c.landscape.prompts},
                        {"context_length", c.landscape.context_length}};
  j["transform"] = Json{{"scale", c.transform.scale},
                        {"max_condition", c.transform.max_condition},
                        {"alpha", c.transform.alpha}};
  j["rates"] = Json{{"trials", c.rates.trials},
                    {"delta", c.rates.delta},
                    {"context_lengths", c.rates.context_lengths},
                    {"reference_factor", c.rates.reference_factor},
                    {"prop6_d", c.rates.prop6_d},
                    {"prop6_sigma0_sq", c.rates.prop6_sigma0_sq}};
  j["energy"] = Json{{"context_length", c.energy.context_length},
                     {"prompts", c.energy.prompts},
                     {"steps", c.energy.steps},
                     {"alpha", c.energy.alpha},
                     {"beta", c.energy.beta},
                     {"gamma", c.energy.gamma},
                     {"trajectory_files", c.energy.trajectory_files}};
  j["baseline"] = Json{{"prompts", c.baseline.prompts},
                       {"context_length", c.baseline.context_length}};
  return j;
}

// Reads typed values out of the merged document, reporting the dotted path.
class Reader {
 public:
  explicit Reader(const Json& root) : root_(root) {}

  const Json& at(const std::string& path) const {
    const Json* node = &root_;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      node = &node->at(key);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return *node;
  }

  double number(const std::string& path) const {
    const Json& v = at(path);
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }

  Index integer(const std::string& path) const {
    const Json& v = at(path);
    if (v.is_number_integer()) return v.get<Index>();
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<Index>(x);
    }
    throw ConfigError(path, "expected an integer");
  }

  bool boolean(const std::string& path) const {
    const Json& v = at(path);
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& path) const {
    const Json& v = at(path);
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& path) const {
    const Json& v = at(path);
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(path, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<Index> integers(const std::string& path) const {
    const Json& v = at(path);
    if (!v.is_array()) throw ConfigError(path, "expected an array of integers");
    std::vector<Index> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(path, "expected an array of integers");
      out.push_back(e.get<Index>());
    }
    return out;
  }

  std::vector<std::uint64_t> seeds(const std::string& path) const {
    const Json& v = at(path);
    if (!v.is_array()) throw ConfigError(path, "expected an array of non-negative integers");
    std::vector<std::uint64_t> out;
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) throw ConfigError(path, "expected an array of non-negative integers");
      out.push_back(e.get<std::uint64_t>());
    }
    return out;
  }

  Grid grid(const std::string& path) const {
    return Grid{number(path + ".min"), number(path + ".max"), integer(path + ".points")};
  }

 private:
  const Json& root_;
};

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Overlays `patch` on `base`; every key must already exist in `base`.
void merge(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(path, "unknown key");
    Json& target = base[it.key()];
    if (target.is_object()) {
      merge(target, it.value(), path);
    } else {
      if (!same_kind(target, it.value())) throw ConfigError(path, "type mismatch");
      target = it.value();
    }
  }
}

Json parse_json(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ConfigError(what, std::string("invalid JSON: ") + e.what());
  }
}

void apply_override(Json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;  // bare strings such as --set task.case=sphere
  }
  // Build {"a": {"b": value}} from "a.b" and merge it, so the same key and
  // type checks apply as for the file.
  Json patch = value;
  std::size_t end = path.size();
  while (true) {
    const std::size_t dot = path.rfind('.', end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string key = path.substr(start, end - start);
    if (key.empty()) throw ConfigError(path, "malformed key");
    patch = Json{{key, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge(doc, patch, "");
}

ExperimentConfig from_json(const Json& doc) {
  const Reader r(doc);
  ExperimentConfig c;
  c.experiment = experiment_from_string(r.text("experiment"));
  try {
    c.task.task_case = task_case_from_string(r.text("task.case"));
  } catch (const std::invalid_argument&) {
    throw ConfigError("task.case", "expected linear, sphere or mixture");
  }
  c.task.n = r.integer("task.n");
  c.task.d = r.integer("task.d");
  c.task.k = r.integer("task.k");
  c.task.radius = r.number("task.radius");
  c.task.sigma0_sq = r.number("task.sigma0_sq");
  c.task.sigmaZ_sq = r.number("task.sigmaZ_sq");
  c.task.weights = r.numbers("task.weights");
  c.task.component_sigma_sq = r.numbers("task.component_sigma_sq");
  try {
    c.attention = attention_kind_from_string(r.text("attention"));
  } catch (const std::invalid_argument&) {
    throw ConfigError("attention", "expected linear, softmax or gaussian");
  }
  c.train.epochs = r.integer("train.epochs");
  c.train.batch_size = r.integer("train.batch_size");
  c.train.dataset_size = r.integer("train.dataset_size");
  c.train.context_length = r.integer("train.context_length");
  c.train.learning_rate = r.number("train.learning_rate");
  c.train.adam_beta1 = r.number("train.adam_beta1");
  c.train.adam_beta2 = r.number("train.adam_beta2");
  c.train.adam_eps = r.number("train.adam_eps");
  c.train.eval_prompts = r.integer("train.eval_prompts");
  c.train.record_every = r.integer("train.record_every");
  c.seeds = r.seeds("seeds");
  c.ideal = r.boolean("ideal");
  c.output_dir = r.text("output_dir");
  c.sweep.context_lengths = r.integers("sweep.context_lengths");
  c.sweep.prompts = r.integer("sweep.prompts");
  c.dim_shift.d_infer = r.integers("dim_shift.d_infer");
  c.dim_shift.context_lengths = r.integers("dim_shift.context_lengths");
  c.dim_shift.prompts = r.integer("dim_shift.prompts");
  c.dim_shift.weights_csv = r.text("dim_shift.weights_csv");
  c.landscape.alpha = r.grid("landscape.alpha");
  c.landscape.beta = r.grid("landscape.beta");
  c.landscape.prompts = r.integer("landscape.prompts");
  c.landscape.context_length = r.integer("landscape.context_length");
  c.transform.scale = r.number("transform.scale");
  c.transform.max_condition = r.number("transform.max_condition");
  c.transform.alpha = r.number("transform.alpha");
  c.rates.trials = r.integer("rates.trials");
  c.rates.delta = r.number("rates.delta");
  c.rates.context_lengths = r.integers("rates.context_lengths");
  c.rates.reference_factor = r.integer("rates.reference_factor");
  c.rates.prop6_d = r.integer("rates.prop6_d");
  c.rates.prop6_sigma0_sq = r.number("rates.prop6_sigma0_sq");
  c.energy.context_length = r.integer("energy.context_length");
  c.energy.prompts = r.integer("energy.prompts");
  c.energy.steps = r.integer("energy.steps");
  c.energy.alpha = r.number("energy.alpha");
  c.energy.beta = r.number("energy.beta");
  c.energy.gamma = r.number("energy.gamma");
  c.energy.trajectory_files = r.integer("energy.trajectory_files");
  c.baseline.prompts = r.integer("baseline.prompts");
  c.baseline.context_length = r.integer("baseline.context_length");
  return c;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

void require_lengths(const std::vector<Index>& lengths, const std::string& field) {
  require(!lengths.empty(), field, "must not be empty");
  for (Index l : lengths) require(l >= 1, field, "entries must be >= 1");
}

// Re-raises a module validator's "prefix.field: message" as a ConfigError.
template <typename F>
void rethrow_as_config(F&& check) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const std::size_t colon = what.find(": ");
    if (colon == std::string::npos) throw ConfigError("<config>", what);
    throw ConfigError(what.substr(0, colon), what.substr(colon + 2));
  }
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kExperimentNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind experiment_from_string(std::string_view name) {
  for (const auto& [k, n] : kExperimentNames) {
    if (n == name) return k;
  }
  throw ConfigError("experiment", "unknown experiment '" + std::string(name) + "'");
}

std::vector<double> Grid::values() const {
  std::vector<double> out;
  if (points < 1) return out;
  if (points == 1) return {min};
  out.reserve(static_cast<std::size_t>(points));
  const double step = (max - min) / static_cast<double>(points - 1);
  for (Index i = 0; i < points; ++i) {
    out.push_back(i + 1 == points ? max : min + step * static_cast<double>(i));
  }
  return out;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::Landscape:
      c.task.task_case = TaskCase::Sphere;
      c.task.sigmaZ_sq = 0.1;
      c.attention = AttentionKind::Softmax;
      break;
    case ExperimentKind::Rates:
      c.task.task_case = TaskCase::Sphere;
      c.task.d = 2;
      c.task.sigmaZ_sq = 0.5;
      break;
    case ExperimentKind::EnergyDemo:
      c.task.task_case = TaskCase::Sphere;
      c.task.n = 2;
      c.task.d = 1;
      c.task.sigmaZ_sq = 10.0;
      c.attention = AttentionKind::Softmax;
      break;
    default:
      break;
  }
  return c;
}

ExperimentConfig parse_config(ExperimentKind kind, std::string_view json_text,
                              const std::vector<std::string>& overrides) {
  Json doc = config_json(default_config(kind));
  if (!json_text.empty()) {
    const Json user = parse_json(json_text, "<config>");
    if (user.is_object() && user.contains("experiment")) {
      if (!user["experiment"].is_string() || user["experiment"].get<std::string>() != to_string(kind)) {
        throw ConfigError("experiment", "config file is for '" + user["experiment"].dump() +
                                            "' but the command is '" + std::string(to_string(kind)) + "'");
      }
    }
    merge(doc, user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

ExperimentConfig load_config(ExperimentKind kind, const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream file(path);
  if (!file) throw ConfigError("--config", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_config(kind, buf.str(), overrides);
}

std::string to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

void validate_config(const ExperimentConfig& c) {
  rethrow_as_config([&] { c.task.validate(); });
  require(!c.seeds.empty(), "seeds", "at least one seed is required");

  switch (c.experiment) {
    case ExperimentKind::Train:
      rethrow_as_config([&] { c.train.validate(); });
      require(c.attention != AttentionKind::GaussianKernel, "attention",
              "the Gaussian-kernel variant is evaluation-only");
      break;
    case ExperimentKind::ContextSweep:
      require_lengths(c.sweep.context_lengths, "sweep.context_lengths");
      require(c.sweep.prompts >= 2, "sweep.prompts", "must be >= 2");
      if (!c.ideal) {
        rethrow_as_config([&] { c.train.validate(); });
        require(c.attention != AttentionKind::GaussianKernel, "attention",
                "the Gaussian-kernel variant is evaluation-only");
      }
      break;
    case ExperimentKind::DimShift:
      require(c.task.task_case == TaskCase::LinearSubspace, "task.case", "dim-shift needs the linear case");
      require(!c.dim_shift.d_infer.empty(), "dim_shift.d_infer", "must not be empty");
      for (Index d : c.dim_shift.d_infer) {
        require(d >= 1 && d < c.task.n, "dim_shift.d_infer", "entries must satisfy 1 <= d_infer < n");
      }
      require_lengths(c.dim_shift.context_lengths, "dim_shift.context_lengths");
      require(c.dim_shift.prompts >= 2, "dim_shift.prompts", "must be >= 2");
      if (!c.ideal && c.dim_shift.weights_csv.empty()) {
        rethrow_as_config([&] { c.train.validate(); });
        require(c.attention != AttentionKind::GaussianKernel, "attention",
                "the Gaussian-kernel variant is evaluation-only");
      }
      break;
    case ExperimentKind::Landscape:
      require(c.attention != AttentionKind::GaussianKernel, "attention", "must be linear or softmax");
      require(c.landscape.alpha.points >= 1, "landscape.alpha.points", "grid must not be empty");
      require(c.landscape.beta.points >= 1, "landscape.beta.points", "grid must not be empty");
      require(std::isfinite(c.landscape.alpha.min) && std::isfinite(c.landscape.alpha.max),
              "landscape.alpha", "bounds must be finite");
      require(std::isfinite(c.landscape.beta.min) && std::isfinite(c.landscape.beta.max),
              "landscape.beta", "bounds must be finite");
      require(c.landscape.prompts >= 2, "landscape.prompts", "must be >= 2");
      require(c.landscape.context_length >= 1, "landscape.context_length", "must be >= 1");
      break;
    case ExperimentKind::Transform:
      require(c.task.task_case == TaskCase::LinearSubspace, "task.case", "transform needs the linear case");
      require(c.attention != AttentionKind::GaussianKernel, "attention", "must be linear or softmax");
      rethrow_as_config([&] { c.train.validate(); });
      require(c.transform.scale >= 0.0, "transform.scale", "must be >= 0");
      require(c.transform.max_condition >= 1.0, "transform.max_condition", "must be >= 1");
      require(c.transform.alpha != 0.0 && std::isfinite(c.transform.alpha), "transform.alpha",
              "must be nonzero");
      break;
    case ExperimentKind::Rates:
      require(c.task.task_case == TaskCase::Sphere, "task.case", "rates uses sphere tokens");
      require(c.rates.trials >= 100, "rates.trials", "must be >= 100");
      require(c.rates.delta > 0.0 && c.rates.delta < 1.0, "rates.delta", "must lie in (0, 1)");
      require_lengths(c.rates.context_lengths, "rates.context_lengths");
      require(c.rates.reference_factor >= 1, "rates.reference_factor", "must be >= 1");
      require(c.rates.prop6_d >= 1 && c.rates.prop6_d <= c.task.n, "rates.prop6_d",
              "must satisfy 1 <= prop6_d <= n");
      require(c.rates.prop6_sigma0_sq > 0.0, "rates.prop6_sigma0_sq", "must be > 0");
      break;
    case ExperimentKind::EnergyDemo:
      require(c.energy.context_length >= 1, "energy.context_length", "must be >= 1");
      require(c.energy.prompts >= 2, "energy.prompts", "must be >= 2");
      require(c.energy.steps >= 1, "energy.steps", "must be >= 1");
      require(c.energy.alpha > 0.0, "energy.alpha", "must be > 0");
      require(c.energy.beta >= 0.0, "energy.beta", "must be >= 0 (0 selects 1/sigmaZ_sq)");
      require(c.energy.gamma >= 0.0, "energy.gamma", "must be >= 0 (0 selects alpha)");
      require(c.energy.trajectory_files >= 0 && c.energy.trajectory_files <= c.energy.prompts,
              "energy.trajectory_files", "must lie in [0, prompts]");
      break;
    case ExperimentKind::BaselineEval:
      require(c.baseline.prompts >= 2, "baseline.prompts", "must be >= 2");
      require(c.baseline.context_length >= 1, "baseline.context_length", "must be >= 1");
      break;
  }
}

}  // namespace icd
