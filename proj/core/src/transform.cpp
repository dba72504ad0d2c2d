#include "icd/transform.hpp"

#include <cmath>
#include <stdexcept>

namespace icd {

AttentionWeights TransformedOptimum::weights(AttentionKind kind) const {
  if (kind == AttentionKind::GaussianKernel) {
    throw std::invalid_argument("TransformedOptimum: no Gaussian-kernel form");
  }
  AttentionWeights w;
  w.kind = kind;
  w.pv = pv_star;
  w.kq = kq_star;
  return w;
}

TransformedOptimum optimal_transformed_weights(const TransformSpec& t, double sigma0_sq,
                                               double sigmaZ_sq, double alpha) {
  if (t.a.rows() != t.a.cols() || t.a_inv.rows() != t.a.rows()) {
    throw std::invalid_argument("optimal_transformed_weights: malformed transform");
  }
  if (t.condition_number() > 1e12) {
    throw std::invalid_argument("optimal_transformed_weights: A is singular (condition > 1e12)");
  }
  if (alpha == 0.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("optimal_transformed_weights: alpha must be nonzero");
  }
  if (!(sigma0_sq + sigmaZ_sq > 0.0)) {
    throw std::invalid_argument("optimal_transformed_weights: variances must be positive");
  }
  TransformedOptimum out;
  out.alpha = alpha;
  out.beta = 1.0 / (alpha * (sigma0_sq + sigmaZ_sq));
  out.pv_star = alpha * t.a_inv;
  // (A A^T)^{-1} = A^{-T} A^{-1}
  out.kq_star = out.beta * (t.a_inv.transpose() * t.a_inv);
  return out;
}

Vector transformed_coords_estimate(const Matrix& context_y, const Vector& query_y,
                                   const TransformSpec& t, double sigma0_sq, double sigmaZ_sq) {
  const Index n = t.a.rows();
  if (context_y.rows() != n || query_y.size() != n || context_y.cols() < 1) {
    throw std::invalid_argument("transformed_coords_estimate: dimension mismatch");
  }
  const Matrix x = t.a_inv * context_y;
  const Vector q = t.a_inv * query_y;
  const Vector overlaps = x.transpose() * q;
  const double scale = 1.0 / ((sigma0_sq + sigmaZ_sq) * static_cast<double>(context_y.cols()));
  return scale * (context_y * overlaps);
}

StructureRecovery structure_recovery(const AttentionWeights& w, const TransformSpec& t) {
  const Index n = t.a.rows();
  const Matrix kq_shape = t.a_inv.transpose() * t.a_inv;
  StructureRecovery r;
  r.alpha_hat = (w.pv.array() * t.a_inv.array()).sum() / t.a_inv.squaredNorm();
  r.beta_hat = (w.kq.array() * kq_shape.array()).sum() / kq_shape.squaredNorm();
  const Matrix eye = Matrix::Identity(n, n);
  r.pv_error = (w.pv * t.a / r.alpha_hat - eye).norm();
  r.kq_error = (w.kq * t.a * t.a.transpose() / r.beta_hat - eye).norm();
  return r;
}

TransformRunResult run_transform_training(const TaskSpec& spec, const TransformSpec& t,
                                          AttentionKind kind, const TrainConfig& cfg) {
  if (spec.task_case != TaskCase::LinearSubspace) {
    throw std::invalid_argument("run_transform_training: requires a linear task");
  }
  spec.validate();
  cfg.validate();
  if (t.a.rows() != spec.n) throw std::invalid_argument("run_transform_training: A has wrong size");

  const TrainStreams streams = TrainStreams::from_seed(cfg.seed);
  auto transformed = [&](const RngStream& stream, Index count) {
    std::vector<Prompt> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      const Episode e = sample_episode(spec, cfg.context_length, stream, static_cast<std::uint64_t>(i));
      out.push_back(apply_transform(e.prompt, t, false));
    }
    return out;
  };
  std::vector<Prompt> train_set = transformed(streams.train_data, cfg.dataset_size);
  const std::vector<Prompt> test_set = transformed(streams.test_data, cfg.eval_prompts);

  TransformRunResult out;
  out.train = train_on_prompts(std::move(train_set), test_set, kind, spec.n, cfg);
  out.recovery = structure_recovery(out.train.final_weights, t);
  out.final_test_mse = out.train.loss_curve.back().test_mse;
  out.bayes_mse = bayes_linear_mse(spec);
  const TransformedOptimum opt = optimal_transformed_weights(t, spec.sigma0_sq, spec.sigmaZ_sq, 1.0);
  out.plugin_mse = evaluate(opt.weights(AttentionKind::Linear), test_set).mean;
  return out;
}

}  // namespace icd
