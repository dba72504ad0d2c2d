#include "icd/tasks.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace icd {

namespace {

[[noreturn]] void bad_field(std::string_view field, std::string_view why) {
  throw std::invalid_argument("task." + std::string(field) + ": " + std::string(why));
}

}  // namespace

std::string_view to_string(TaskCase c) {
  switch (c) {
    case TaskCase::LinearSubspace: return "linear";
    case TaskCase::Sphere: return "sphere";
    case TaskCase::GaussianMixture: return "mixture";
  }
  return "unknown";
}

TaskCase task_case_from_string(std::string_view name) {
  if (name == "linear" || name == "1") return TaskCase::LinearSubspace;
  if (name == "sphere" || name == "2") return TaskCase::Sphere;
  if (name == "mixture" || name == "3") return TaskCase::GaussianMixture;
  throw std::invalid_argument("task.case: unknown case '" + std::string(name) +
                              "' (expected linear, sphere or mixture)");
}

void TaskSpec::validate() const {
  if (n < 1) bad_field("n", "must be >= 1");
  if (!(sigmaZ_sq > 0.0) || !std::isfinite(sigmaZ_sq)) bad_field("sigmaZ_sq", "must be > 0");
  switch (task_case) {
    case TaskCase::LinearSubspace:
      if (d < 1 || d > n) bad_field("d", "must satisfy 1 <= d <= n");
      if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq)) bad_field("sigma0_sq", "must be > 0");
      break;
    case TaskCase::Sphere:
      if (d < 0 || d + 1 > n) bad_field("d", "must satisfy 1 <= d+1 <= n");
      if (!(radius > 0.0) || !std::isfinite(radius)) bad_field("radius", "must be > 0");
      break;
    case TaskCase::GaussianMixture: {
      if (k < 1) bad_field("k", "must be >= 1");
      if (!(radius > 0.0) || !std::isfinite(radius)) bad_field("radius", "must be > 0");
      if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq)) bad_field("sigma0_sq", "must be > 0");
      if (!weights.empty()) {
        if (static_cast<Index>(weights.size()) != k) bad_field("weights", "length must equal k");
        double total = 0.0;
        for (double w : weights) {
          if (!(w >= 0.0) || !std::isfinite(w)) bad_field("weights", "entries must be >= 0");
          total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) bad_field("weights", "must sum to 1");
      }
      if (!component_sigma_sq.empty()) {
        if (static_cast<Index>(component_sigma_sq.size()) != k) {
          bad_field("component_sigma_sq", "length must equal k");
        }
        for (double s : component_sigma_sq) {
          if (!(s > 0.0) || !std::isfinite(s)) bad_field("component_sigma_sq", "entries must be > 0");
        }
      }
      break;
    }
  }
}

Index TaskSpec::subspace_dim() const {
  switch (task_case) {
    case TaskCase::LinearSubspace: return d;
    case TaskCase::Sphere: return d + 1;
    case TaskCase::GaussianMixture: return 0;
  }
  return 0;
}

std::vector<double> TaskSpec::mixture_weights() const {
  if (!weights.empty()) return weights;
  return std::vector<double>(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
}

double TaskSpec::component_variance(Index a) const {
  if (component_sigma_sq.empty()) return sigma0_sq;
  return component_sigma_sq.at(static_cast<std::size_t>(a));
}

TransformSpec TransformSpec::from_matrix(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw std::invalid_argument("transform: A must be square and non-empty");
  }
  require_finite(a, "transform A");
  TransformSpec t;
  t.a = a;
  if (t.condition_number() > 1e12) {
    throw std::invalid_argument("transform: A is singular (condition number > 1e12)");
  }
  t.a_inv = a.partialPivLu().inverse();
  return t;
}

double TransformSpec::condition_number() const {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  const double smallest = s[s.size() - 1];
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smallest;
}

TaskInstance sample_task(const TaskSpec& spec, RngStream& rng) {
  spec.validate();
  TaskInstance task;
  task.spec = spec;
  switch (spec.task_case) {
    case TaskCase::LinearSubspace:
    case TaskCase::Sphere:
      task.basis = random_orthonormal_basis(spec.n, spec.subspace_dim(), rng);
      break;
    case TaskCase::GaussianMixture: {
      task.centers.resize(spec.n, spec.k);
      for (Index a = 0; a < spec.k; ++a) {
        Vector g = rng.gaussian_vector(spec.n);
        // A zero draw has probability zero; redraw anyway so the norm is defined.
        while (g.norm() == 0.0) g = rng.gaussian_vector(spec.n);
        task.centers.col(a) = spec.radius * g / g.norm();
      }
      break;
    }
  }
  return task;
}

Vector sample_token(const TaskInstance& task, RngStream& rng) {
  const TaskSpec& spec = task.spec;
  switch (spec.task_case) {
    case TaskCase::LinearSubspace: {
      // P y with y ~ N(0, s0^2 I_n) has the same law as B g with g ~ N(0, s0^2 I_d).
      const Vector g = rng.gaussian_vector(task.basis.cols());
      return std::sqrt(spec.sigma0_sq) * (task.basis * g);
    }
    case TaskCase::Sphere: {
      Vector g = rng.gaussian_vector(task.basis.cols());
      while (g.norm() == 0.0) g = rng.gaussian_vector(task.basis.cols());
      return spec.radius * (task.basis * (g / g.norm()));
    }
    case TaskCase::GaussianMixture: {
      const std::vector<double> w = spec.mixture_weights();
      const double u = rng.uniform();
      Index a = 0;
      double cumulative = w[0];
      while (u >= cumulative && a + 1 < spec.k) {
        ++a;
        cumulative += w[static_cast<std::size_t>(a)];
      }
      const double sd = std::sqrt(spec.component_variance(a));
      return task.centers.col(a) + sd * rng.gaussian_vector(spec.n);
    }
  }
  throw std::logic_error("sample_token: unknown task case");
}

Prompt sample_prompt(const TaskInstance& task, Index length, RngStream& rng) {
  if (length < 1) throw std::invalid_argument("sample_prompt: L must be >= 1");
  const Index n = task.spec.n;
  Prompt p;
  p.context.resize(n, length);
  for (Index t = 0; t < length; ++t) p.context.col(t) = sample_token(task, rng);
  p.target = sample_token(task, rng);
  p.query = p.target + std::sqrt(task.spec.sigmaZ_sq) * rng.gaussian_vector(n);
  return p;
}

Episode sample_episode(const TaskSpec& spec, Index length, const RngStream& rng,
                       std::uint64_t index) {
  const RngStream episode_stream = rng.substream(index);
  RngStream task_rng = episode_stream.substream(0);
  RngStream prompt_rng = episode_stream.substream(1);
  Episode e;
  e.task = sample_task(spec, task_rng);
  e.prompt = sample_prompt(e.task, length, prompt_rng);
  return e;
}

std::vector<Episode> sample_dataset(const TaskSpec& spec, Index count, Index length,
                                    const RngStream& rng) {
  if (count < 1) throw std::invalid_argument("sample_dataset: N must be >= 1");
  spec.validate();
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    out.push_back(sample_episode(spec, length, rng, static_cast<std::uint64_t>(i)));
  }
  return out;
}

Prompt apply_transform(const Prompt& p, const TransformSpec& t, bool transform_target) {
  const Index n = p.dim();
  if (t.a.rows() != n || t.a.cols() != n) {
    throw std::invalid_argument("apply_transform: A is " + std::to_string(t.a.rows()) + "x" +
                                std::to_string(t.a.cols()) + " but tokens have dim " +
                                std::to_string(n));
  }
  Prompt out;
  out.context = t.a * p.context;
  out.query = t.a * p.query;
  out.target = transform_target ? Vector(t.a * p.target) : p.target;
  return out;
}

TransformSpec random_well_conditioned_transform(Index n, double scale, double max_condition,
                                                RngStream& rng) {
  if (max_condition < 1.0) throw std::invalid_argument("transform: max condition must be >= 1");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Matrix a = Matrix::Identity(n, n) +
                     scale * rng.gaussian_matrix(n, n) / std::sqrt(static_cast<double>(n));
    TransformSpec t;
    t.a = a;
    if (t.condition_number() <= max_condition) return TransformSpec::from_matrix(a);
  }
  throw std::runtime_error("transform: no well-conditioned draw after 10000 attempts");
}

}  // namespace icd
