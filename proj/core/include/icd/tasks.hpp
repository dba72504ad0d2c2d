#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "icd/numerics.hpp"

namespace icd {

enum class TaskCase { LinearSubspace, Sphere, GaussianMixture };

std::string_view to_string(TaskCase c);
TaskCase task_case_from_string(std::string_view name);

/// Parameters of a task ensemble.
///
/// `d` is the subspace dimension for LinearSubspace and the sphere dimension
/// for Sphere (the sphere S^d lives in a random (d+1)-dim subspace). For
/// GaussianMixture, `radius` is the norm of every center and `weights`
/// defaults to uniform when empty. `component_sigma_sq`, when non-empty,
/// overrides `sigma0_sq` per component.
struct TaskSpec {
  TaskCase task_case = TaskCase::LinearSubspace;
  Index n = 16;
  Index d = 8;
  Index k = 8;
  double radius = 1.0;
  double sigma0_sq = 2.0;
  double sigmaZ_sq = 1.0;
  std::vector<double> weights;
  std::vector<double> component_sigma_sq;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Column count of TaskInstance::basis (d, or d+1 for Sphere).
  Index subspace_dim() const;
  std::vector<double> mixture_weights() const;
  double component_variance(Index a) const;

  bool operator==(const TaskSpec&) const = default;
};

/// One realized token distribution p_X drawn from the ensemble.
struct TaskInstance {
  TaskSpec spec;
  Matrix basis;    // n x d (LinearSubspace) or n x (d+1) (Sphere); empty otherwise
  Matrix centers;  // n x K (GaussianMixture); empty otherwise

  Matrix projector() const { return basis * basis.transpose(); }
};

/// A denoising prompt: L pure tokens, the corrupted query and the clean
/// target the query was made from.
struct Prompt {
  Matrix context;  // n x L
  Vector query;
  Vector target;

  Index length() const { return context.cols(); }
  Index dim() const { return context.rows(); }
};

/// A prompt together with the task instance that generated it.
struct Episode {
  TaskInstance task;
  Prompt prompt;
};

struct TransformSpec {
  Matrix a;
  Matrix a_inv;

  /// Computes the inverse; throws if `a` is not square or is numerically
  /// singular (condition number above 1e12).
  static TransformSpec from_matrix(const Matrix& a);
  double condition_number() const;
};

TaskInstance sample_task(const TaskSpec& spec, RngStream& rng);

/// One pure token from the task's distribution.
Vector sample_token(const TaskInstance& task, RngStream& rng);

Prompt sample_prompt(const TaskInstance& task, Index length, RngStream& rng);

/// Episode i uses a fresh task and prompt drawn from `rng.substream(i)`, so
/// the result does not depend on generation order.
Episode sample_episode(const TaskSpec& spec, Index length, const RngStream& rng,
                       std::uint64_t index);
std::vector<Episode> sample_dataset(const TaskSpec& spec, Index count, Index length,
                                    const RngStream& rng);

Prompt apply_transform(const Prompt& p, const TransformSpec& t, bool transform_target);

/// I + scale * G / sqrt(n) with G standard Gaussian, redrawn until the
/// condition number is at most `max_condition`.
TransformSpec random_well_conditioned_transform(Index n, double scale, double max_condition,
                                                RngStream& rng);

}  // namespace icd
