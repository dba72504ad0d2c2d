#include "icd/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace icd {

namespace {

void require_case(const TaskInstance& task, TaskCase expected, std::string_view op) {
  if (task.spec.task_case != expected) {
    throw std::invalid_argument(std::string(op) + ": requires a " + std::string(to_string(expected)) +
                                " task, got " + std::string(to_string(task.spec.task_case)));
  }
}

void require_dim(const TaskInstance& task, const Vector& query, std::string_view op) {
  if (query.size() != task.spec.n) {
    throw std::invalid_argument(std::string(op) + ": query has dim " + std::to_string(query.size()) +
                                ", task has n=" + std::to_string(task.spec.n));
  }
}

// sum_a softmax(logits)_a * centers.col(a), with -inf logits skipped.
Vector softmax_average(const Matrix& centers, const Vector& logits) {
  double shift = -std::numeric_limits<double>::infinity();
  for (Index a = 0; a < logits.size(); ++a) shift = std::max(shift, logits[a]);
  Vector acc = Vector::Zero(centers.rows());
  double total = 0.0;
  for (Index a = 0; a < logits.size(); ++a) {
    if (logits[a] == -std::numeric_limits<double>::infinity()) continue;
    const double w = std::exp(logits[a] - shift);
    acc += w * centers.col(a);
    total += w;
  }
  return acc / total;
}

Vector log_weights(const TaskSpec& spec) {
  const std::vector<double> w = spec.mixture_weights();
  Vector out(spec.k);
  for (Index a = 0; a < spec.k; ++a) {
    const double wa = w[static_cast<std::size_t>(a)];
    out[a] = wa > 0.0 ? std::log(wa) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Zero: return "zero";
    case BaselineKind::BayesLinear: return "bayes_linear";
    case BaselineKind::BayesSphere: return "bayes_sphere";
    case BaselineKind::BayesMixtureGeneral: return "bayes_mixture";
    case BaselineKind::BayesMixtureZeroVar: return "bayes_mixture_zerovar";
    case BaselineKind::EmpiricalProjector: return "empirical_projector";
  }
  return "unknown";
}

bool applies_to(BaselineKind kind, TaskCase c) {
  switch (kind) {
    case BaselineKind::Zero: return true;
    case BaselineKind::BayesLinear:
    case BaselineKind::EmpiricalProjector: return c == TaskCase::LinearSubspace;
    case BaselineKind::BayesSphere: return c == TaskCase::Sphere;
    case BaselineKind::BayesMixtureGeneral:
    case BaselineKind::BayesMixtureZeroVar: return c == TaskCase::GaussianMixture;
  }
  return false;
}

std::vector<BaselineKind> baselines_for(TaskCase c) {
  std::vector<BaselineKind> out;
  for (BaselineKind k : {BaselineKind::Zero, BaselineKind::BayesLinear, BaselineKind::EmpiricalProjector,
                         BaselineKind::BayesSphere, BaselineKind::BayesMixtureGeneral,
                         BaselineKind::BayesMixtureZeroVar}) {
    if (applies_to(k, c)) out.push_back(k);
  }
  return out;
}

Vector bayes_linear(const TaskInstance& task, const Vector& query) {
  require_case(task, TaskCase::LinearSubspace, "bayes_linear");
  require_dim(task, query, "bayes_linear");
  const double s0 = task.spec.sigma0_sq;
  const double shrink = s0 / (s0 + task.spec.sigmaZ_sq);
  return shrink * (task.basis * (task.basis.transpose() * query));
}

double bayes_linear_mse(const TaskSpec& spec) {
  if (spec.task_case != TaskCase::LinearSubspace) {
    throw std::invalid_argument("bayes_linear_mse: requires a linear task");
  }
  const double s0 = spec.sigma0_sq;
  const double sz = spec.sigmaZ_sq;
  if (s0 + sz == 0.0) return 0.0;
  return static_cast<double>(spec.d) * s0 * sz / (s0 + sz);
}

Vector bayes_sphere(const TaskInstance& task, const Vector& query) {
  require_case(task, TaskCase::Sphere, "bayes_sphere");
  require_dim(task, query, "bayes_sphere");
  const Vector coords = task.basis.transpose() * query;
  const double norm = coords.norm();
  if (norm == 0.0) {
    log_warn("bayes_sphere: query has no component in the sphere's span; returning 0");
    return Vector::Zero(task.spec.n);
  }
  const double nu = 0.5 * static_cast<double>(task.spec.d - 1);
  const double radius = task.spec.radius;
  const double ratio = bessel_ratio(nu, radius * norm / task.spec.sigmaZ_sq);
  return (ratio * radius / norm) * (task.basis * coords);
}

Vector bayes_mixture(const TaskInstance& task, const Vector& query) {
  require_case(task, TaskCase::GaussianMixture, "bayes_mixture");
  require_dim(task, query, "bayes_mixture");
  const TaskSpec& spec = task.spec;
  const double sz = spec.sigmaZ_sq;

  if (spec.component_sigma_sq.empty()) {
    const double s0 = spec.sigma0_sq;
    const double total = s0 + sz;
    const Vector logits =
        log_weights(spec) + (task.centers.transpose() * query) / total;
    return (s0 / total) * query + (sz / total) * softmax_average(task.centers, logits);
  }

  // Per-component variances: the query's marginal under component a is
  // N(mu_a, (s_a^2 + sZ^2) I), and its posterior mean is
  // (s_a^2 q + sZ^2 mu_a) / (s_a^2 + sZ^2).
  const Index n = spec.n;
  const Vector lw = log_weights(spec);
  Vector logits(spec.k);
  Matrix means(n, spec.k);
  for (Index a = 0; a < spec.k; ++a) {
    const double sa = spec.component_variance(a);
    const double total = sa + sz;
    logits[a] = lw[a] - 0.5 * static_cast<double>(n) * std::log(total) -
                (query - task.centers.col(a)).squaredNorm() / (2.0 * total);
    means.col(a) = (sa * query + sz * task.centers.col(a)) / total;
  }
  return softmax_average(means, logits);
}

Vector bayes_mixture_zerovar(const TaskInstance& task, const Vector& query) {
  require_case(task, TaskCase::GaussianMixture, "bayes_mixture_zerovar");
  require_dim(task, query, "bayes_mixture_zerovar");
  const Vector logits =
      log_weights(task.spec) + (task.centers.transpose() * query) / task.spec.sigmaZ_sq;
  return softmax_average(task.centers, logits);
}

Matrix empirical_projector(const Matrix& context, double sigma0_sq) {
  if (!(sigma0_sq > 0.0)) throw std::invalid_argument("empirical_projector: sigma0_sq must be > 0");
  if (context.cols() < 1) throw std::invalid_argument("empirical_projector: L must be >= 1");
  const double scale = 1.0 / (sigma0_sq * static_cast<double>(context.cols()));
  Matrix gram = Matrix::Zero(context.rows(), context.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(context);
  Matrix out = gram.selfadjointView<Eigen::Lower>();
  return scale * out;
}

Vector predict_baseline(BaselineKind kind, const TaskInstance& task, const Prompt& prompt) {
  if (!applies_to(kind, task.spec.task_case)) {
    throw std::invalid_argument("baseline " + std::string(to_string(kind)) +
                                " does not apply to a " +
                                std::string(to_string(task.spec.task_case)) + " task");
  }
  switch (kind) {
    case BaselineKind::Zero: return Vector::Zero(prompt.dim());
    case BaselineKind::BayesLinear: return bayes_linear(task, prompt.query);
    case BaselineKind::BayesSphere: return bayes_sphere(task, prompt.query);
    case BaselineKind::BayesMixtureGeneral: return bayes_mixture(task, prompt.query);
    case BaselineKind::BayesMixtureZeroVar: return bayes_mixture_zerovar(task, prompt.query);
    case BaselineKind::EmpiricalProjector: {
      const double s0 = task.spec.sigma0_sq;
      const double shrink = s0 / (s0 + task.spec.sigmaZ_sq);
      return shrink * (empirical_projector(prompt.context, s0) * prompt.query);
    }
  }
  throw std::logic_error("predict_baseline: unknown kind");
}

MeanStat evaluate_baseline(BaselineKind kind, std::span<const Episode> episodes) {
  if (episodes.empty()) throw std::invalid_argument("evaluate_baseline: no episodes");
  MeanAccumulator acc;
  for (const Episode& e : episodes) {
    acc.add((predict_baseline(kind, e.task, e.prompt) - e.prompt.target).squaredNorm());
  }
  return acc.result();
}

}  // namespace icd
