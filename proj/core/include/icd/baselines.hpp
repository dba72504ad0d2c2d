#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "icd/tasks.hpp"

namespace icd {

enum class BaselineKind {
  Zero,
  BayesLinear,
  BayesSphere,
  BayesMixtureGeneral,
  BayesMixtureZeroVar,
  EmpiricalProjector,
};

std::string_view to_string(BaselineKind kind);
bool applies_to(BaselineKind kind, TaskCase c);
/// Every kind applicable to `c`, Zero first.
std::vector<BaselineKind> baselines_for(TaskCase c);

/// Posterior mean for a random subspace: s0^2 / (s0^2 + sZ^2) * P * query.
Vector bayes_linear(const TaskInstance& task, const Vector& query);
/// d s0^2 sZ^2 / (s0^2 + sZ^2).
double bayes_linear_mse(const TaskSpec& spec);

/// Posterior mean for the uniform measure on a radius-R sphere S^d:
/// ratio((d-1)/2, R |x_par| / sZ^2) * R * x_par / |x_par| with x_par the
/// projection of the query onto the sphere's span. Returns 0 (and logs a
/// warning) when the projection vanishes.
Vector bayes_sphere(const TaskInstance& task, const Vector& query);

/// Posterior mean for an isotropic Gaussian mixture. With equal component
/// variances this is
///   s0^2/(s0^2+sZ^2) q + sZ^2/(s0^2+sZ^2) * sum_a w_a e^{<mu_a,q>/(s0^2+sZ^2)} mu_a / (...)
/// and with per-component variances the general responsibilities are used.
Vector bayes_mixture(const TaskInstance& task, const Vector& query);

/// Zero-variance limit: softmax over <mu_a, q>/sZ^2 (+ log w_a) of the centers.
Vector bayes_mixture_zerovar(const TaskInstance& task, const Vector& query);

/// (1 / (s0^2 L)) sum_t X_t X_t^T.
Matrix empirical_projector(const Matrix& context, double sigma0_sq);

/// Prediction of `kind` for one episode; throws if the kind does not apply.
Vector predict_baseline(BaselineKind kind, const TaskInstance& task, const Prompt& prompt);

/// Mean squared error of `kind` over the episodes, in index order.
MeanStat evaluate_baseline(BaselineKind kind, std::span<const Episode> episodes);

}  // namespace icd
