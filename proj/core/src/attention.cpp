#include "icd/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace icd {

namespace {

void require_kind(const AttentionWeights& w, AttentionKind kind, std::string_view op) {
  if (w.kind != kind) {
    throw std::invalid_argument(std::string(op) + ": weights are " + std::string(to_string(w.kind)) +
                                ", expected " + std::string(to_string(kind)));
  }
}

void require_prompt(const AttentionWeights& w, const Prompt& p, std::string_view op) {
  if (p.dim() != w.dim() || p.query.size() != w.dim()) {
    throw std::invalid_argument(std::string(op) + ": prompt dim " + std::to_string(p.dim()) +
                                " does not match weights dim " + std::to_string(w.dim()));
  }
  if (p.length() < 1) throw std::invalid_argument(std::string(op) + ": empty context");
}

// Per-prompt forward state shared by the loss and its gradient.
struct SoftmaxState {
  Vector probs;  // g = softmax(X^T kq q)
  Vector mixed;  // X g
};

SoftmaxState softmax_state(const AttentionWeights& w, const Prompt& p) {
  const Vector logits = p.context.transpose() * (w.kq * p.query);
  SoftmaxState s;
  s.probs = softmax_stable(logits);
  s.mixed = p.context * s.probs;
  return s;
}

// Adds this prompt's squared error and unnormalised gradient to `out`.
void accumulate(const AttentionWeights& w, const Prompt& p, MseGradient& out, KahanSum& loss) {
  const Matrix& x = p.context;
  const double inv_len = 1.0 / static_cast<double>(p.length());
  if (w.kind == AttentionKind::Linear) {
    const Vector kq_q = w.kq * p.query;
    const Vector h = x * (x.transpose() * kq_q) * inv_len;  // C kq q, C = X X^T / L
    const Vector residual = w.pv * h - p.target;
    loss.add(residual.squaredNorm());
    out.pv.noalias() += 2.0 * residual * h.transpose();
    const Vector back = x * (x.transpose() * (w.pv.transpose() * residual)) * inv_len;
    out.kq.noalias() += 2.0 * back * p.query.transpose();
    return;
  }
  // Softmax: f = pv X g, dL/dz = 2 (diag g - g g^T) X^T pv^T r.
  const SoftmaxState s = softmax_state(w, p);
  const Vector residual = w.pv * s.mixed - p.target;
  loss.add(residual.squaredNorm());
  out.pv.noalias() += 2.0 * residual * s.mixed.transpose();
  const Vector projected = x.transpose() * (w.pv.transpose() * residual);
  const double centre = s.probs.dot(projected);
  const Vector dz = 2.0 * (s.probs.array() * (projected.array() - centre)).matrix();
  out.kq.noalias() += (x * dz) * p.query.transpose();
}

}  // namespace

std::string_view to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::Linear: return "linear";
    case AttentionKind::Softmax: return "softmax";
    case AttentionKind::GaussianKernel: return "gaussian";
  }
  return "unknown";
}

AttentionKind attention_kind_from_string(std::string_view name) {
  if (name == "linear") return AttentionKind::Linear;
  if (name == "softmax") return AttentionKind::Softmax;
  if (name == "gaussian") return AttentionKind::GaussianKernel;
  throw std::invalid_argument("attention kind: unknown '" + std::string(name) +
                              "' (expected linear, softmax or gaussian)");
}

AttentionWeights AttentionWeights::scaled_identity(AttentionKind kind, Index n, double alpha,
                                                   double beta) {
  AttentionWeights w;
  w.kind = kind;
  w.pv = alpha * Matrix::Identity(n, n);
  w.kq = beta * Matrix::Identity(n, n);
  if (kind == AttentionKind::GaussianKernel) {
    // key = query = sqrt(beta) I, so that on fixed-norm tokens the kernel
    // matches softmax attention with kq = beta I.
    if (beta < 0.0) throw std::invalid_argument("scaled_identity: Gaussian kernel needs beta >= 0");
    const double scale = std::sqrt(beta);
    w.key = scale * Matrix::Identity(n, n);
    w.query = scale * Matrix::Identity(n, n);
  }
  return w;
}

void AttentionWeights::validate() const {
  const Index n = kq.rows();
  if (n == 0 || kq.cols() != n || pv.rows() != n || pv.cols() != n) {
    throw std::invalid_argument("attention weights: kq and pv must be square and of equal size");
  }
  require_finite(kq, "attention weights kq");
  require_finite(pv, "attention weights pv");
  if (kind == AttentionKind::GaussianKernel) {
    if (key.rows() != n || key.cols() != n || query.rows() != n || query.cols() != n) {
      throw std::invalid_argument("attention weights: key/query must be n x n");
    }
    require_finite(key, "attention weights key");
    require_finite(query, "attention weights query");
  }
}

ScaledIdentitySummary summarize(const AttentionWeights& w) {
  const Index n = w.dim();
  ScaledIdentitySummary s;
  s.alpha = w.pv.diagonal().mean();
  s.beta = w.kq.diagonal().mean();
  if (n > 1) {
    const double off = (w.pv.squaredNorm() - w.pv.diagonal().squaredNorm()) +
                       (w.kq.squaredNorm() - w.kq.diagonal().squaredNorm());
    s.offdiag_rms = std::sqrt(off / static_cast<double>(2 * n * (n - 1)));
  }
  return s;
}

Vector forward_linear(const AttentionWeights& w, const Prompt& p) {
  require_kind(w, AttentionKind::Linear, "forward_linear");
  require_prompt(w, p, "forward_linear");
  const Vector scores = p.context.transpose() * (w.kq * p.query);
  return w.pv * (p.context * scores) / static_cast<double>(p.length());
}

Vector forward_softmax(const AttentionWeights& w, const Prompt& p) {
  require_kind(w, AttentionKind::Softmax, "forward_softmax");
  require_prompt(w, p, "forward_softmax");
  return w.pv * softmax_state(w, p).mixed;
}

Vector forward_gaussian(const AttentionWeights& w, const Prompt& p) {
  require_kind(w, AttentionKind::GaussianKernel, "forward_gaussian");
  require_prompt(w, p, "forward_gaussian");
  const Matrix keys = w.key * p.context;
  const Vector q = w.query * p.query;
  const Vector logits = -0.5 * (keys.colwise() - q).colwise().squaredNorm().transpose();
  return w.pv * (p.context * softmax_stable(logits));
}

Vector forward(const AttentionWeights& w, const Prompt& p) {
  switch (w.kind) {
    case AttentionKind::Linear: return forward_linear(w, p);
    case AttentionKind::Softmax: return forward_softmax(w, p);
    case AttentionKind::GaussianKernel: return forward_gaussian(w, p);
  }
  throw std::logic_error("forward: unknown kind");
}

MseGradient grad_mse(const AttentionWeights& w, std::span<const Prompt> prompts,
                     std::span<const Index> indices) {
  if (w.kind == AttentionKind::GaussianKernel) {
    throw std::invalid_argument("grad_mse: the Gaussian-kernel variant is evaluation-only");
  }
  if (indices.empty()) throw std::invalid_argument("grad_mse: empty batch");
  const Index n = w.dim();
  MseGradient out{Matrix::Zero(n, n), Matrix::Zero(n, n), 0.0};
  KahanSum loss;
  for (Index i : indices) {
    const Prompt& p = prompts[static_cast<std::size_t>(i)];
    require_prompt(w, p, "grad_mse");
    accumulate(w, p, out, loss);
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.kq *= inv;
  out.pv *= inv;
  out.loss = loss.value() * inv;
  return out;
}

MseGradient grad_mse(const AttentionWeights& w, std::span<const Prompt> batch) {
  std::vector<Index> indices(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) indices[i] = static_cast<Index>(i);
  return grad_mse(w, batch, indices);
}

Vector softmax_small_beta(const AttentionWeights& w, const Prompt& p, double eps) {
  require_kind(w, AttentionKind::Softmax, "softmax_small_beta");
  require_prompt(w, p, "softmax_small_beta");
  if (!(eps > 0.0)) throw std::invalid_argument("softmax_small_beta: eps must be > 0");
  const Vector mean = p.context.rowwise().mean();
  const Vector scores = p.context.transpose() * (w.kq * p.query);
  const Vector centred = scores.array() - mean.dot(w.kq * p.query);
  const Vector linear_term = p.context * centred / static_cast<double>(p.length());
  return w.pv * (mean / eps + linear_term);
}

MeanStat evaluate(const AttentionWeights& w, std::span<const Prompt> prompts) {
  if (prompts.empty()) throw std::invalid_argument("evaluate: no prompts");
  MeanAccumulator acc;
  for (const Prompt& p : prompts) acc.add((forward(w, p) - p.target).squaredNorm());
  return acc.result();
}

}  // namespace icd
