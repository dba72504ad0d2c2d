#pragma once

#include <vector>

#include "icd/attention.hpp"

namespace icd {

enum class EnergyKind { LogSumExp, NaiveSphericalHopfield };

std::string_view to_string(EnergyKind kind);

/// Context-conditioned associative-memory energy over a state s in R^n.
///
///   LogSumExp:              |s|^2 / (2 alpha) - (1/beta) log sum_t exp(beta X_t^T s)
///   NaiveSphericalHopfield: |s|^2 / (2 alpha) - (1/(2L)) s^T (sum_t X_t X_t^T) s
///
/// For the spherical model `alpha` plays the role of gamma and `beta` is unused.
struct EnergyModel {
  Matrix context;  // n x L memories
  double alpha = 1.0;
  double beta = 1.0;
  EnergyKind kind = EnergyKind::LogSumExp;

  void validate() const;
};

struct DescentTrajectory {
  std::vector<Vector> states;
  std::vector<double> energies;
  double step_size = 0.0;
};

double energy(const EnergyModel& m, const Vector& s);
Vector energy_grad(const EnergyModel& m, const Vector& s);

/// s(t+1) = s(t) - gamma grad E(s(t)); for LogSumExp this is
/// (1 - gamma/alpha) s(t) + gamma X softmax(beta X^T s(t)).
/// Returns steps+1 states with the energy at each.
DescentTrajectory descend(const EnergyModel& m, const Vector& s0, double gamma, Index steps);

/// |J - J^T|_F / max(1, |J|_F) for the Jacobian of s -> pv X softmax(X^T kq s),
/// J = pv X (diag g - g g^T) X^T kq.
double jacobian_symmetry_residual(const AttentionWeights& w, const Matrix& context, const Vector& s);

}  // namespace icd
