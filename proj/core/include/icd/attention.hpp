#pragma once

#include <span>
#include <string_view>

#include "icd/tasks.hpp"

namespace icd {

enum class AttentionKind { Linear, Softmax, GaussianKernel };

std::string_view to_string(AttentionKind kind);
AttentionKind attention_kind_from_string(std::string_view name);

/// Weights of a one-layer, single-head attention map with merged
/// key-query (`kq`) and projection-value (`pv`) matrices, all n x n.
/// The Gaussian-kernel variant also carries separate key and query maps.
struct AttentionWeights {
  AttentionKind kind = AttentionKind::Linear;
  Matrix kq;
  Matrix pv;
  Matrix key;    // GaussianKernel only
  Matrix query;  // GaussianKernel only

  Index dim() const { return kq.rows(); }

  /// pv = alpha I, kq = beta I.
  static AttentionWeights scaled_identity(AttentionKind kind, Index n, double alpha, double beta);

  /// Throws unless the matrices are square, finite and agree in size.
  void validate() const;
};

struct ScaledIdentitySummary {
  double alpha = 0.0;  // mean diagonal of pv
  double beta = 0.0;   // mean diagonal of kq
  double offdiag_rms = 0.0;
};

ScaledIdentitySummary summarize(const AttentionWeights& w);

/// (1/L) pv X X^T kq q. The query token's value never enters the sum.
Vector forward_linear(const AttentionWeights& w, const Prompt& p);

/// pv X softmax(X^T kq q), softmax over the L context positions only.
Vector forward_softmax(const AttentionWeights& w, const Prompt& p);

/// sum_t pv X_t exp(-|key X_t - query q|^2 / 2) / sum_t exp(...).
Vector forward_gaussian(const AttentionWeights& w, const Prompt& p);

/// Dispatches on w.kind.
Vector forward(const AttentionWeights& w, const Prompt& p);

struct MseGradient {
  Matrix kq;
  Matrix pv;
  double loss = 0.0;
};

/// Batch-mean squared error and its exact gradient with respect to (kq, pv).
/// Linear and Softmax only; the per-prompt terms are summed in index order.
MseGradient grad_mse(const AttentionWeights& w, std::span<const Prompt> batch);

/// Same, over the prompts selected by `indices`.
MseGradient grad_mse(const AttentionWeights& w, std::span<const Prompt> prompts,
                     std::span<const Index> indices);

/// Leading two terms of the softmax forward at weights (pv / eps, eps kq):
///   (1/eps) pv Xbar + (1/L) pv sum_t X_t (X_t - Xbar)^T kq q.
Vector softmax_small_beta(const AttentionWeights& w, const Prompt& p, double eps);

/// Mean squared error over the prompts, summed in index order.
MeanStat evaluate(const AttentionWeights& w, std::span<const Prompt> prompts);

}  // namespace icd
