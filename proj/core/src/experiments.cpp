#include "icd/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "icd/baselines.hpp"
#include "icd/energy.hpp"
#include "icd/transform.hpp"
#include "json.hpp"

#ifndef ICD_BUILD_ID
#define ICD_BUILD_ID "unknown"
#endif

namespace icd {

namespace {

// Root stream ids per experiment, so evaluation sets never coincide with the
// training streams (stream 0) of the same seed.
constexpr std::uint64_t kSweepStream = 0x101;
constexpr std::uint64_t kDimShiftStream = 0x102;
constexpr std::uint64_t kLandscapeStream = 0x103;
constexpr std::uint64_t kTransformStream = 0x104;
constexpr std::uint64_t kRatesStream = 0x105;
constexpr std::uint64_t kEnergyStream = 0x106;
constexpr std::uint64_t kBaselineStream = 0x107;

using Clock = std::chrono::steady_clock;

class ArtifactSink {
 public:
  ArtifactSink(const ExperimentConfig& cfg, const std::filesystem::path& dir)
      : cfg_(cfg), start_(Clock::now()) {
    out_.directory = dir;
    if (!dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw ConfigError("output_dir", "cannot create '" + dir.string() + "': " + ec.message());
    }
    // The resolved config goes first so an unwritable directory fails early.
    text("config.resolved.json", to_json(cfg));
  }

  void text(const std::string& name, const std::string& body) {
    if (!out_.directory.empty()) {
      std::ofstream file(out_.directory / name, std::ios::binary);
      file << body;
      if (!file) throw ConfigError("output_dir", "cannot write '" + (out_.directory / name).string() + "'");
    }
    out_.files.push_back(name);
  }

  void table(const std::string& name, CsvTable t) {
    if (!out_.directory.empty()) t.write(out_.directory / name);
    out_.files.push_back(name);
    out_.tables.emplace(name, std::move(t));
  }

  RunArtifacts finish() {
    out_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    if (!out_.directory.empty()) {
      nlohmann::ordered_json m;
      m["experiment"] = std::string(to_string(cfg_.experiment));
      m["files"] = out_.files;
      m["seeds"] = cfg_.seeds;
      m["build_id"] = ICD_BUILD_ID;
      m["wall_time_seconds"] = out_.wall_seconds;
      std::ofstream file(out_.directory / "manifest.json", std::ios::binary);
      file << m.dump(2) << "\n";
      if (!file) throw std::runtime_error("cannot write manifest.json");
    }
    return std::move(out_);
  }

 private:
  const ExperimentConfig& cfg_;
  Clock::time_point start_;
  RunArtifacts out_;
};

CsvCell cell(Index v) { return CsvCell{static_cast<std::int64_t>(v)}; }
CsvCell cell(std::uint64_t v) { return CsvCell{static_cast<std::int64_t>(v)}; }
CsvCell cell(double v) { return CsvCell{v}; }
CsvCell cell(std::string_view v) { return CsvCell{std::string(v)}; }

void add_weights(CsvTable& t, std::uint64_t seed, const AttentionWeights& w) {
  for (const auto& [name, m] : {std::pair<const char*, const Matrix*>{"pv", &w.pv}, {"kq", &w.kq}}) {
    for (Index r = 0; r < m->rows(); ++r) {
      for (Index c = 0; c < m->cols(); ++c) {
        t.add_row({cell(seed), cell(name), cell(r), cell(c), cell((*m)(r, c))});
      }
    }
  }
}

CsvTable weights_table() { return CsvTable{{"seed", "matrix", "row", "col", "value"}, {}}; }
CsvTable loss_table() { return CsvTable{{"seed", "epoch", "train_mse", "test_mse"}, {}}; }

void add_loss(CsvTable& t, std::uint64_t seed, const std::vector<LossRecord>& curve) {
  for (const auto& r : curve) t.add_row({cell(seed), cell(r.epoch), cell(r.train_mse), cell(r.test_mse)});
}

TrainConfig seeded(const TrainConfig& base, std::uint64_t seed) {
  TrainConfig c = base;
  c.seed = seed;
  return c;
}

struct PairedStat {
  MeanStat model;
  MeanStat bayes;
  MeanStat excess;
};

// Model and Bayes errors on the same freshly drawn episodes.
PairedStat paired_mse(const AttentionWeights& w, const TaskSpec& spec, Index length, Index count,
                      const RngStream& stream) {
  MeanAccumulator model, bayes, diff;
  for (Index i = 0; i < count; ++i) {
    const Episode e = sample_episode(spec, length, stream, static_cast<std::uint64_t>(i));
    const double m = (forward(w, e.prompt) - e.prompt.target).squaredNorm();
    const double b = (bayes_predict(e.task, e.prompt.query) - e.prompt.target).squaredNorm();
    model.add(m);
    bayes.add(b);
    diff.add(m - b);
  }
  return {model.result(), bayes.result(), diff.result()};
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::filesystem::path default_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const std::string name(to_string(cfg.experiment));
  if (const char* env = std::getenv("ICD_OUT_DIR"); env && *env) {
    return std::filesystem::path(env) / name;
  }
  return std::filesystem::path("runs") / name;
}

std::pair<double, double> ideal_scales(const TaskSpec& spec) {
  if (spec.task_case == TaskCase::LinearSubspace) return {1.0, 1.0 / (spec.sigma0_sq + spec.sigmaZ_sq)};
  return {1.0, 1.0 / spec.sigmaZ_sq};
}

AttentionWeights ideal_weights(const TaskSpec& spec) {
  const auto [alpha, beta] = ideal_scales(spec);
  const AttentionKind kind =
      spec.task_case == TaskCase::LinearSubspace ? AttentionKind::Linear : AttentionKind::Softmax;
  return AttentionWeights::scaled_identity(kind, spec.n, alpha, beta);
}

Vector bayes_predict(const TaskInstance& task, const Vector& query) {
  switch (task.spec.task_case) {
    case TaskCase::LinearSubspace: return bayes_linear(task, query);
    case TaskCase::Sphere: return bayes_sphere(task, query);
    case TaskCase::GaussianMixture: return bayes_mixture(task, query);
  }
  throw std::logic_error("bayes_predict: unknown case");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be > 0");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: x values are all equal");
  return sxy / sxx;
}

AttentionWeights weights_from_table(const CsvTable& table, AttentionKind kind, std::uint64_t seed) {
  Index n = 0;
  const auto wanted = static_cast<double>(seed);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.number(i, "seed") != wanted) continue;
    n = std::max(n, static_cast<Index>(table.number(i, "row")) + 1);
  }
  if (n == 0) throw std::invalid_argument("weights table: no rows for seed " + std::to_string(seed));
  AttentionWeights w;
  w.kind = kind;
  w.pv = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  w.kq = w.pv;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.number(i, "seed") != wanted) continue;
    const std::string m = table.text(i, "matrix");
    const auto r = static_cast<Index>(table.number(i, "row"));
    const auto c = static_cast<Index>(table.number(i, "col"));
    if (r < 0 || c < 0 || r >= n || c >= n) throw std::invalid_argument("weights table: index out of range");
    if (m == "pv") {
      w.pv(r, c) = table.number(i, "value");
    } else if (m == "kq") {
      w.kq(r, c) = table.number(i, "value");
    } else {
      throw std::invalid_argument("weights table: unknown matrix '" + m + "'");
    }
  }
  w.validate();  // rejects missing entries (still NaN)
  return w;
}

RunArtifacts run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  CsvTable loss = loss_table();
  CsvTable weights = weights_table();
  CsvTable summary{{"seed", "final_train_mse", "final_test_mse", "alpha", "beta", "alpha_beta", "offdiag_rms"}, {}};
  std::vector<std::pair<BaselineKind, std::vector<MeanStat>>> baselines;

  for (std::uint64_t seed : cfg.seeds) {
    log_info("train: seed " + std::to_string(seed));
    const TrainResult r = train(cfg.task, cfg.attention, seeded(cfg.train, seed));
    add_loss(loss, seed, r.loss_curve);
    add_weights(weights, seed, r.final_weights);
    const LossRecord& last = r.loss_curve.back();
    summary.add_row({cell(seed), cell(last.train_mse), cell(last.test_mse), cell(r.summary.alpha),
                     cell(r.summary.beta), cell(r.summary.alpha * r.summary.beta), cell(r.summary.offdiag_rms)});
    for (const auto& [kind, stat] : r.baseline_mse) {
      auto it = std::find_if(baselines.begin(), baselines.end(), [k = kind](const auto& b) { return b.first == k; });
      if (it == baselines.end()) {
        baselines.push_back({kind, {}});
        it = std::prev(baselines.end());
      }
      it->second.push_back(stat);
    }
  }

  // Each seed has its own test set of equal size: the pooled mean is the
  // mean of the per-seed means.
  CsvTable base{{"kind", "mse"}, {}};
  for (const auto& [kind, stats] : baselines) {
    double mean = 0.0;
    for (const auto& s : stats) mean += s.mean / static_cast<double>(stats.size());
    base.add_row({cell(to_string(kind)), cell(mean)});
  }

  sink.table("loss_curve.csv", std::move(loss));
  sink.table("weights_final.csv", std::move(weights));
  sink.table("baselines.csv", std::move(base));
  sink.table("summary.csv", std::move(summary));
  return sink.finish();
}

RunArtifacts run_context_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  const std::uint64_t seed = cfg.seeds.front();
  const RngStream root(seed, kSweepStream);
  CsvTable table{{"L", "mode", "mse", "bayes_mse", "excess"}, {}};
  for (Index length : cfg.sweep.context_lengths) {
    AttentionWeights w;
    if (cfg.ideal) {
      w = ideal_weights(cfg.task);
    } else {
      TrainConfig tc = seeded(cfg.train, seed);
      tc.context_length = length;
      log_info("context-sweep: training at L=" + std::to_string(length));
      w = train(cfg.task, cfg.attention, tc).final_weights;
    }
    const PairedStat s =
        paired_mse(w, cfg.task, length, cfg.sweep.prompts, root.substream(static_cast<std::uint64_t>(length)));
    table.add_row({cell(length), cell(cfg.ideal ? "ideal" : "trained"), cell(s.model.mean), cell(s.bayes.mean),
                   cell(s.excess.mean)});
  }
  sink.table("context_sweep.csv", std::move(table));
  return sink.finish();
}

RunArtifacts run_dim_shift(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  const std::uint64_t seed = cfg.seeds.front();
  AttentionWeights w;
  if (cfg.ideal) {
    w = ideal_weights(cfg.task);
  } else if (!cfg.dim_shift.weights_csv.empty()) {
    w = weights_from_table(CsvTable::read(cfg.dim_shift.weights_csv), cfg.attention, seed);
    if (w.dim() != cfg.task.n) throw ConfigError("dim_shift.weights_csv", "weights do not match task.n");
  } else {
    w = train(cfg.task, cfg.attention, seeded(cfg.train, seed)).final_weights;
  }
  CsvTable used = weights_table();
  add_weights(used, seed, w);

  const RngStream root(seed, kDimShiftStream);
  CsvTable table{{"d_infer", "L", "mse", "bayes_mse"}, {}};
  for (Index d : cfg.dim_shift.d_infer) {
    TaskSpec spec = cfg.task;
    spec.d = d;
    for (Index length : cfg.dim_shift.context_lengths) {
      const RngStream stream =
          root.substream(static_cast<std::uint64_t>(d)).substream(static_cast<std::uint64_t>(length));
      const PairedStat s = paired_mse(w, spec, length, cfg.dim_shift.prompts, stream);
      table.add_row({cell(d), cell(length), cell(s.model.mean), cell(s.bayes.mean)});
    }
  }
  sink.table("weights.csv", std::move(used));
  sink.table("dim_shift.csv", std::move(table));
  return sink.finish();
}

RunArtifacts run_landscape(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  const LandscapeSettings& ls = cfg.landscape;
  const RngStream root(cfg.seeds.front(), kLandscapeStream);
  std::vector<Prompt> prompts;
  prompts.reserve(static_cast<std::size_t>(ls.prompts));
  for (Index i = 0; i < ls.prompts; ++i) {
    prompts.push_back(sample_episode(cfg.task, ls.context_length, root, static_cast<std::uint64_t>(i)).prompt);
  }

  // The output is linear in alpha: with v = f(alpha = 1, beta),
  // mse(alpha) = alpha^2 <|v|^2> - 2 alpha <v.x> + <|x|^2>.
  const std::vector<double> alphas = ls.alpha.values();
  const std::vector<double> betas = ls.beta.values();
  Matrix grid(static_cast<Index>(alphas.size()), static_cast<Index>(betas.size()));
  KahanSum xx;
  for (const auto& p : prompts) xx.add(p.target.squaredNorm());
  const double inv = 1.0 / static_cast<double>(prompts.size());
  for (std::size_t j = 0; j < betas.size(); ++j) {
    const AttentionWeights unit = AttentionWeights::scaled_identity(cfg.attention, cfg.task.n, 1.0, betas[j]);
    KahanSum vv, vx;
    for (const auto& p : prompts) {
      const Vector v = forward(unit, p);
      vv.add(v.squaredNorm());
      vx.add(v.dot(p.target));
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const double a = alphas[i];
      grid(static_cast<Index>(i), static_cast<Index>(j)) =
          (a * a * vv.value() - 2.0 * a * vx.value() + xx.value()) * inv;
    }
  }

  CsvTable table{{"alpha", "beta", "mse"}, {}};
  Index best_i = 0, best_j = 0;
  for (Index i = 0; i < grid.rows(); ++i) {
    for (Index j = 0; j < grid.cols(); ++j) {
      table.add_row({cell(alphas[static_cast<std::size_t>(i)]), cell(betas[static_cast<std::size_t>(j)]),
                     cell(grid(i, j))});
      if (grid(i, j) < grid(best_i, best_j)) {
        best_i = i;
        best_j = j;
      }
    }
  }

  auto point = [&](double a, double b) {
    const AttentionWeights w = AttentionWeights::scaled_identity(cfg.attention, cfg.task.n, a, b);
    std::vector<double> losses;
    losses.reserve(prompts.size());
    for (const auto& p : prompts) losses.push_back((forward(w, p) - p.target).squaredNorm());
    return losses;
  };
  auto stat = [](const std::vector<double>& v) {
    MeanAccumulator acc;
    for (double x : v) acc.add(x);
    return acc.result();
  };
  const auto [a_opt, b_opt] = ideal_scales(cfg.task);
  const double a_min = alphas[static_cast<std::size_t>(best_i)];
  const double b_min = betas[static_cast<std::size_t>(best_j)];
  const std::vector<double> at_opt = point(a_opt, b_opt);
  const std::vector<double> at_mirror = point(-a_opt, -b_opt);
  std::vector<double> gap(at_opt.size());
  for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = at_mirror[i] - at_opt[i];

  CsvTable points{{"label", "alpha", "beta", "mse", "stderr"}, {}};
  const MeanStat s_opt = stat(at_opt), s_min = stat(point(a_min, b_min)), s_mirror = stat(at_mirror),
                 s_gap = stat(gap);
  points.add_row({cell("analytic_optimum"), cell(a_opt), cell(b_opt), cell(s_opt.mean), cell(s_opt.std_error)});
  points.add_row({cell("grid_argmin"), cell(a_min), cell(b_min), cell(s_min.mean), cell(s_min.std_error)});
  points.add_row(
      {cell("mirrored_optimum"), cell(-a_opt), cell(-b_opt), cell(s_mirror.mean), cell(s_mirror.std_error)});
  // Paired difference mirrored minus analytic on the same prompts.
  points.add_row({cell("mirror_difference"), cell(-a_opt), cell(-b_opt), cell(s_gap.mean), cell(s_gap.std_error)});

  sink.table("landscape.csv", std::move(table));
  sink.table("points.csv", std::move(points));
  return sink.finish();
}

RunArtifacts run_transform(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  RngStream a_stream = RngStream(cfg.seeds.front(), kTransformStream);
  const TransformSpec t =
      random_well_conditioned_transform(cfg.task.n, cfg.transform.scale, cfg.transform.max_condition, a_stream);

  CsvTable a_table{{"row", "col", "value"}, {}};
  for (Index r = 0; r < t.a.rows(); ++r) {
    for (Index c = 0; c < t.a.cols(); ++c) a_table.add_row({cell(r), cell(c), cell(t.a(r, c))});
  }

  CsvTable loss = loss_table();
  CsvTable weights = weights_table();
  CsvTable recovery{{"seed", "final_test_mse", "bayes_mse", "plugin_mse", "alpha_hat", "beta_hat",
                     "alpha_beta_hat", "pv_error", "kq_error", "condition"},
                    {}};
  for (std::uint64_t seed : cfg.seeds) {
    TrainConfig tc = seeded(cfg.train, seed);
    if (cfg.ideal) tc.epochs = 0;
    log_info("transform: seed " + std::to_string(seed));
    const TransformRunResult r = run_transform_training(cfg.task, t, cfg.attention, tc);
    add_loss(loss, seed, r.train.loss_curve);
    add_weights(weights, seed, r.train.final_weights);
    recovery.add_row({cell(seed), cell(r.final_test_mse), cell(r.bayes_mse), cell(r.plugin_mse),
                      cell(r.recovery.alpha_hat), cell(r.recovery.beta_hat),
                      cell(r.recovery.alpha_hat * r.recovery.beta_hat), cell(r.recovery.pv_error),
                      cell(r.recovery.kq_error), cell(t.condition_number())});
  }
  sink.table("transform_A.csv", std::move(a_table));
  sink.table("loss_curve.csv", std::move(loss));
  sink.table("weights_final.csv", std::move(weights));
  sink.table("recovery.csv", std::move(recovery));
  return sink.finish();
}

RunArtifacts run_rates(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  const RatesSettings& rs = cfg.rates;
  const RngStream root(cfg.seeds.front(), kRatesStream);
  const double delta = rs.delta;
  const double radius = cfg.task.radius;
  const double sz2 = cfg.task.sigmaZ_sq;

  CsvTable rates{{"L", "delta", "quantity", "bound", "violation_rate"}, {}};
  CsvTable quantiles{{"L", "delta", "median", "upper_quantile", "shape"}, {}};

  for (Index length : rs.context_lengths) {
    const RngStream per_l = root.substream(static_cast<std::uint64_t>(length));

    // Sphere tokens: Hoeffding bounds on the softmax numerator and
    // denominator sums, in coordinates of the task's span V. Everything is
    // scaled by e^{-m}, m = R |x| / sZ^2, which leaves the comparison intact.
    const RngStream sphere_stream = per_l.substream(0);
    Index den_violations = 0, num_violations = 0;
    double den_bound_sum = 0.0, num_bound_sum = 0.0;
    for (Index trial = 0; trial < rs.trials; ++trial) {
      RngStream rng = sphere_stream.substream(static_cast<std::uint64_t>(trial));
      const TaskInstance task = sample_task(cfg.task, rng);
      const Prompt p = sample_prompt(task, length, rng);
      const Matrix reference_tokens = [&] {
        const Index m = rs.reference_factor * length;
        Matrix r(cfg.task.n, m);
        for (Index t = 0; t < m; ++t) r.col(t) = sample_token(task, rng);
        return r;
      }();
      const Index dim_v = task.basis.cols();
      const Vector x = task.basis.transpose() * p.query;
      const double m = radius * x.norm() / sz2;
      auto sums = [&](const Matrix& tokens) {
        const Matrix y = task.basis.transpose() * tokens;
        const Vector w = ((y.transpose() * x).array() / sz2 - m).exp().matrix();
        const double inv = 1.0 / static_cast<double>(tokens.cols());
        return std::pair<double, Vector>{w.sum() * inv, (y * w) * inv};
      };
      const auto [den, num] = sums(p.context);
      const auto [den_ref, num_ref] = sums(reference_tokens);
      const double scaled_sinh = 0.5 * (1.0 - std::exp(-2.0 * m));
      const double den_bound = scaled_sinh * std::sqrt(2.0 / static_cast<double>(length) * std::log(2.0 / delta));
      const double num_bound =
          radius * std::sqrt(2.0 / static_cast<double>(length) *
                             std::log(2.0 * static_cast<double>(dim_v) / delta));
      if (std::abs(den - den_ref) >= den_bound && den_bound > 0.0) ++den_violations;
      if ((num - num_ref).lpNorm<Eigen::Infinity>() >= num_bound) ++num_violations;
      den_bound_sum += den_bound * std::exp(m);
      num_bound_sum += num_bound * std::exp(m);
    }
    const double trials = static_cast<double>(rs.trials);
    rates.add_row({cell(length), cell(delta), cell("denominator"), cell(den_bound_sum / trials),
                   cell(static_cast<double>(den_violations) / trials)});
    rates.add_row({cell(length), cell(delta), cell("numerator"), cell(num_bound_sum / trials),
                   cell(static_cast<double>(num_violations) / trials)});

    // Gaussian subspace tokens: max-norm error of the empirical projector
    // applied to the query, relative to |P x|, against the rate shape.
    TaskSpec linear;
    linear.task_case = TaskCase::LinearSubspace;
    linear.n = cfg.task.n;
    linear.d = rs.prop6_d;
    linear.sigma0_sq = rs.prop6_sigma0_sq;
    linear.sigmaZ_sq = sz2;
    const RngStream linear_stream = per_l.substream(1);
    std::vector<double> deviations;
    deviations.reserve(static_cast<std::size_t>(rs.trials));
    const double s = (static_cast<double>(rs.prop6_d) + std::log(2.0 / delta)) / static_cast<double>(length);
    const double shape = std::max(std::sqrt(s), s);
    Index shape_violations = 0;
    for (Index trial = 0; trial < rs.trials; ++trial) {
      const Episode e = sample_episode(linear, length, linear_stream, static_cast<std::uint64_t>(trial));
      const Vector px = e.task.basis * (e.task.basis.transpose() * e.prompt.query);
      const Matrix pi_hat = empirical_projector(e.prompt.context, linear.sigma0_sq);
      const Vector err = e.task.basis.transpose() * (pi_hat * px - px);
      const double dev = px.norm() > 0.0 ? err.lpNorm<Eigen::Infinity>() / px.norm() : 0.0;
      deviations.push_back(dev);
      if (dev >= shape) ++shape_violations;
    }
    rates.add_row({cell(length), cell(delta), cell("projector"), cell(shape),
                   cell(static_cast<double>(shape_violations) / trials)});
    quantiles.add_row({cell(length), cell(delta), cell(quantile(deviations, 0.5)),
                       cell(quantile(deviations, 1.0 - delta)), cell(shape)});
  }
  sink.table("rates.csv", std::move(rates));
  sink.table("projector_quantiles.csv", std::move(quantiles));
  return sink.finish();
}

RunArtifacts run_energy_demo(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  const EnergySettings& es = cfg.energy;
  const double alpha = es.alpha;
  const double beta = es.beta > 0.0 ? es.beta : 1.0 / cfg.task.sigmaZ_sq;
  const double gamma = es.gamma > 0.0 ? es.gamma : alpha;
  const RngStream root(cfg.seeds.front(), kEnergyStream);
  const AttentionWeights attention = AttentionWeights::scaled_identity(AttentionKind::Softmax, cfg.task.n, alpha, beta);

  std::vector<MeanAccumulator> dist(static_cast<std::size_t>(es.steps + 1));
  std::vector<MeanAccumulator> diff(static_cast<std::size_t>(es.steps + 1));
  double one_step_gap = 0.0;
  double max_increase = -std::numeric_limits<double>::infinity();

  for (Index i = 0; i < es.prompts; ++i) {
    const Episode e = sample_episode(cfg.task, es.context_length, root, static_cast<std::uint64_t>(i));
    const EnergyModel model{e.prompt.context, alpha, beta, EnergyKind::LogSumExp};
    const DescentTrajectory traj = descend(model, e.prompt.query, gamma, es.steps);
    const double d1 = (traj.states[1] - e.prompt.target).squaredNorm();
    for (Index k = 0; k <= es.steps; ++k) {
      const double dk = (traj.states[static_cast<std::size_t>(k)] - e.prompt.target).squaredNorm();
      dist[static_cast<std::size_t>(k)].add(dk);
      diff[static_cast<std::size_t>(k)].add(dk - d1);
      if (k > 0) {
        max_increase = std::max(max_increase, traj.energies[static_cast<std::size_t>(k)] -
                                                  traj.energies[static_cast<std::size_t>(k - 1)]);
      }
    }
    one_step_gap = std::max(
        one_step_gap, (traj.states[1] - forward_softmax(attention, e.prompt)).lpNorm<Eigen::Infinity>());

    if (i < es.trajectory_files) {
      CsvTable t{{"step", "energy", "dist_to_target", "dist_to_query"}, {}};
      for (Index k = 0; k <= es.steps; ++k) {
        const Vector& s = traj.states[static_cast<std::size_t>(k)];
        t.add_row({cell(k), cell(traj.energies[static_cast<std::size_t>(k)]), cell((s - e.prompt.target).norm()),
                   cell((s - e.prompt.query).norm())});
      }
      sink.table("trajectory_" + std::to_string(i) + ".csv", std::move(t));
    }
  }

  CsvTable summary{{"step", "mean_sq_dist_to_target", "stderr", "diff_vs_step1", "diff_stderr"}, {}};
  for (Index k = 0; k <= es.steps; ++k) {
    const MeanStat d = dist[static_cast<std::size_t>(k)].result();
    const MeanStat g = diff[static_cast<std::size_t>(k)].result();
    summary.add_row({cell(k), cell(d.mean), cell(d.std_error), cell(g.mean), cell(g.std_error)});
  }
  CsvTable checks{{"check", "value"}, {}};
  // Only meaningful when gamma == alpha: then step 1 is the attention output.
  checks.add_row({cell("one_step_attention_max_abs_diff"), cell(one_step_gap)});
  checks.add_row({cell("max_energy_increase"), cell(max_increase)});
  checks.add_row({cell("gamma"), cell(gamma)});
  checks.add_row({cell("beta"), cell(beta)});
  sink.table("energy_summary.csv", std::move(summary));
  sink.table("energy_checks.csv", std::move(checks));
  return sink.finish();
}

RunArtifacts run_baseline_eval(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  ArtifactSink sink(cfg, out_dir);
  const RngStream root(cfg.seeds.front(), kBaselineStream);
  const std::vector<BaselineKind> kinds = baselines_for(cfg.task.task_case);
  std::vector<MeanAccumulator> acc(kinds.size());
  for (Index i = 0; i < cfg.baseline.prompts; ++i) {
    const Episode e = sample_episode(cfg.task, cfg.baseline.context_length, root, static_cast<std::uint64_t>(i));
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      acc[k].add((predict_baseline(kinds[k], e.task, e.prompt) - e.prompt.target).squaredNorm());
    }
  }
  CsvTable table{{"kind", "mse", "stderr"}, {}};
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const MeanStat s = acc[k].result();
    table.add_row({cell(to_string(kinds[k])), cell(s.mean), cell(s.std_error)});
  }
  sink.table("baselines.csv", std::move(table));
  return sink.finish();
}

RunArtifacts run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  switch (cfg.experiment) {
    case ExperimentKind::Train: return run_train(cfg, out_dir);
    case ExperimentKind::ContextSweep: return run_context_sweep(cfg, out_dir);
    case ExperimentKind::DimShift: return run_dim_shift(cfg, out_dir);
    case ExperimentKind::Landscape: return run_landscape(cfg, out_dir);
    case ExperimentKind::Transform: return run_transform(cfg, out_dir);
    case ExperimentKind::Rates: return run_rates(cfg, out_dir);
    case ExperimentKind::EnergyDemo: return run_energy_demo(cfg, out_dir);
    case ExperimentKind::BaselineEval: return run_baseline_eval(cfg, out_dir);
  }
  throw std::logic_error("run_experiment: unknown experiment");
}

}  // namespace icd
