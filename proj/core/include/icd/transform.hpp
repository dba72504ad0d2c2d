#pragma once

#include "icd/training.hpp"

namespace icd {

/// Optimal one-layer weights when every prompt is mapped through a fixed
/// invertible A and the target stays in the original coordinates:
/// pv = alpha A^{-1}, kq = beta (A A^T)^{-1}, alpha beta = 1/(s0^2 + sZ^2).
struct TransformedOptimum {
  Matrix pv_star;
  Matrix kq_star;
  double alpha = 1.0;
  double beta = 1.0;

  AttentionWeights weights(AttentionKind kind) const;
};

TransformedOptimum optimal_transformed_weights(const TransformSpec& t, double sigma0_sq,
                                               double sigmaZ_sq, double alpha);

/// Denoising estimate in transformed coordinates Y = A X:
///   (1 / ((s0^2 + sZ^2) L)) sum_t Y_t <A^{-1} Y_t, A^{-1} y_query>.
Vector transformed_coords_estimate(const Matrix& context_y, const Vector& query_y,
                                   const TransformSpec& t, double sigma0_sq, double sigmaZ_sq);

/// How closely trained weights match the A-structured optimum. The scales
/// are least-squares fits: alpha_hat = <pv, A^{-1}>_F / |A^{-1}|_F^2 and
/// likewise beta_hat against (A A^T)^{-1}.
struct StructureRecovery {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  double pv_error = 0.0;  // |pv A / alpha_hat - I|_F
  double kq_error = 0.0;  // |kq A A^T / beta_hat - I|_F
};

StructureRecovery structure_recovery(const AttentionWeights& w, const TransformSpec& t);

struct TransformRunResult {
  TrainResult train;
  StructureRecovery recovery;
  double final_test_mse = 0.0;
  double bayes_mse = 0.0;   // closed form for the untransformed task
  double plugin_mse = 0.0;  // optimum weights on the same test prompts, no training
};

/// Trains on transformed prompts (context and query mapped by A, target
/// left untransformed). Case 1 only. With cfg.epochs == 0 the result
/// describes the initialisation.
TransformRunResult run_transform_training(const TaskSpec& spec, const TransformSpec& t,
                                          AttentionKind kind, const TrainConfig& cfg);

}  // namespace icd
