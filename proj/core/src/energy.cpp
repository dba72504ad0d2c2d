#include "icd/energy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace icd {

namespace {

void require_state(const EnergyModel& m, const Vector& s, std::string_view op) {
  m.validate();
  if (s.size() != m.context.rows()) {
    throw std::invalid_argument(std::string(op) + ": state has dim " + std::to_string(s.size()) +
                                ", memories have dim " + std::to_string(m.context.rows()));
  }
}

}  // namespace

std::string_view to_string(EnergyKind kind) {
  switch (kind) {
    case EnergyKind::LogSumExp: return "logsumexp";
    case EnergyKind::NaiveSphericalHopfield: return "spherical_hopfield";
  }
  return "unknown";
}

void EnergyModel::validate() const {
  if (context.cols() < 1 || context.rows() < 1) throw std::invalid_argument("energy: empty context");
  if (alpha == 0.0 || !std::isfinite(alpha)) throw std::invalid_argument("energy: alpha must be nonzero");
  if (kind == EnergyKind::LogSumExp && !(beta > 0.0)) {
    throw std::invalid_argument("energy: beta must be > 0 for the log-sum-exp energy");
  }
}

double energy(const EnergyModel& m, const Vector& s) {
  require_state(m, s, "energy");
  const double quadratic = s.squaredNorm() / (2.0 * m.alpha);
  if (m.kind == EnergyKind::LogSumExp) {
    const Vector logits = m.beta * (m.context.transpose() * s);
    return quadratic - log_sum_exp(logits) / m.beta;
  }
  const Vector overlaps = m.context.transpose() * s;
  return quadratic - overlaps.squaredNorm() / (2.0 * static_cast<double>(m.context.cols()));
}

Vector energy_grad(const EnergyModel& m, const Vector& s) {
  require_state(m, s, "energy_grad");
  if (m.kind == EnergyKind::LogSumExp) {
    const Vector g = softmax_stable(m.beta * (m.context.transpose() * s));
    return s / m.alpha - m.context * g;
  }
  const Vector overlaps = m.context.transpose() * s;
  return s / m.alpha - m.context * overlaps / static_cast<double>(m.context.cols());
}

DescentTrajectory descend(const EnergyModel& m, const Vector& s0, double gamma, Index steps) {
  if (steps < 0) throw std::invalid_argument("descend: steps must be >= 0");
  require_state(m, s0, "descend");
  DescentTrajectory traj;
  traj.step_size = gamma;
  traj.states.reserve(static_cast<std::size_t>(steps + 1));
  traj.energies.reserve(static_cast<std::size_t>(steps + 1));
  traj.states.push_back(s0);
  traj.energies.push_back(energy(m, s0));
  const double keep = 1.0 - gamma / m.alpha;
  const double inv_len = 1.0 / static_cast<double>(m.context.cols());
  for (Index t = 0; t < steps; ++t) {
    const Vector& s = traj.states.back();
    Vector pull;
    if (m.kind == EnergyKind::LogSumExp) {
      pull = m.context * softmax_stable(m.beta * (m.context.transpose() * s));
    } else {
      pull = m.context * (m.context.transpose() * s) * inv_len;
    }
    // Written in update form so that gamma == alpha drops the residual exactly.
    Vector next = gamma * pull;
    if (keep != 0.0) next += keep * s;
    traj.energies.push_back(energy(m, next));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double jacobian_symmetry_residual(const AttentionWeights& w, const Matrix& context, const Vector& s) {
  if (w.kind != AttentionKind::Softmax) {
    throw std::invalid_argument("jacobian_symmetry_residual: requires softmax weights");
  }
  if (context.rows() != w.dim() || s.size() != w.dim() || context.cols() < 1) {
    throw std::invalid_argument("jacobian_symmetry_residual: dimension mismatch");
  }
  const Vector g = softmax_stable(context.transpose() * (w.kq * s));
  const Vector xg = context * g;
  // Y = X (diag g - g g^T) X^T
  const Matrix y = context * g.asDiagonal() * context.transpose() - xg * xg.transpose();
  const Matrix j = w.pv * y * w.kq;
  const double asym = (j - j.transpose()).norm();
  return asym / std::max(1.0, j.norm());
}

}  // namespace icd
