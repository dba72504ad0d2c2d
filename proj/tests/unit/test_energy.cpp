#include <gtest/gtest.h>

#include <cmath>

#include "icd/energy.hpp"
#include "support.hpp"

namespace icd {
namespace {

using test::random_prompts;
using test::sphere_spec;

Vector numeric_state_gradient(const EnergyModel& m, Vector s, double h = 1e-5) {
  Vector g(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    const double keep = s(i);
    s(i) = keep + h;
    const double up = energy(m, s);
    s(i) = keep - h;
    const double down = energy(m, s);
    s(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

EnergyModel model_for(const Prompt& p, EnergyKind kind, double alpha, double beta) {
  EnergyModel m;
  m.context = p.context;
  m.alpha = alpha;
  m.beta = beta;
  m.kind = kind;
  return m;
}

TEST(Energy, GradientMatchesFiniteDifferences) {
  RngStream rng(1, 0);
  for (auto kind : {EnergyKind::LogSumExp, EnergyKind::NaiveSphericalHopfield}) {
    for (const auto& p : random_prompts(sphere_spec(6, 2, 1.0, 0.3), 10, 15, 1)) {
      const EnergyModel m = model_for(p, kind, rng.uniform(0.5, 2.0), rng.uniform(0.5, 5.0));
      const Vector s = p.query + 0.3 * rng.gaussian_vector(6);
      EXPECT_LT(test::max_relative_error(energy_grad(m, s), numeric_state_gradient(m, s)), 1e-7)
          << to_string(kind);
    }
  }
}

TEST(Energy, LogSumExpClosedFormOnSingleMemory) {
  Matrix x(2, 1);
  x << 1.0, 0.0;
  EnergyModel m;
  m.context = x;
  m.alpha = 2.0;
  m.beta = 3.0;
  Vector s(2);
  s << 0.5, -1.0;
  EXPECT_NEAR(energy(m, s), 1.25 / 4.0 - 0.5, 1e-15);
}

TEST(Descend, OneStepWithGammaAlphaIsSoftmaxAttention) {
  for (const auto& p : random_prompts(sphere_spec(16, 8, 1.0, 0.1), 10, 20, 2)) {
    const EnergyModel m = model_for(p, EnergyKind::LogSumExp, 1.5, 10.0);
    const auto traj = descend(m, p.query, 1.5, 1);
    const auto w = AttentionWeights::scaled_identity(AttentionKind::Softmax, 16, 1.5, 10.0);
    EXPECT_LT((traj.states[1] - forward_softmax(w, p)).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Descend, OneStepSphericalModelIsLinearAttention) {
  for (const auto& p : random_prompts(sphere_spec(16, 8, 1.0, 0.1), 10, 20, 3)) {
    const EnergyModel m = model_for(p, EnergyKind::NaiveSphericalHopfield, 0.7, 1.0);
    const auto traj = descend(m, p.query, 0.7, 1);
    const auto w = AttentionWeights::scaled_identity(AttentionKind::Linear, 16, 0.7, 1.0);
    EXPECT_LT((traj.states[1] - forward_linear(w, p)).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Descend, UpdateEqualsGradientStep) {
  const auto p = random_prompts(sphere_spec(6, 2, 1.0, 0.3), 1, 10, 4).front();
  const EnergyModel m = model_for(p, EnergyKind::LogSumExp, 1.0, 4.0);
  const auto traj = descend(m, p.query, 0.3, 3);
  ASSERT_EQ(traj.states.size(), 4u);
  for (std::size_t t = 0; t < 3; ++t) {
    const Vector want = traj.states[t] - 0.3 * energy_grad(m, traj.states[t]);
    EXPECT_LT((traj.states[t + 1] - want).norm(), 1e-13);
  }
}

TEST(Descend, EnergyNonIncreasingForStepsUpToAlpha) {
  // Property over random contexts, inverse temperatures and step sizes.
  RngStream rng(5, 0);
  for (const auto& p : random_prompts(sphere_spec(8, 3, 1.0, 1.0), 20, 20, 5)) {
    const double alpha = rng.uniform(0.5, 2.0);
    const double beta = rng.uniform(0.1, 10.0);
    for (double frac : {0.25, 1.0}) {
      const EnergyModel m = model_for(p, EnergyKind::LogSumExp, alpha, beta);
      const auto traj = descend(m, p.query, frac * alpha, 30);
      for (std::size_t t = 1; t < traj.energies.size(); ++t) {
        EXPECT_LE(traj.energies[t], traj.energies[t - 1] + 1e-12);
      }
    }
  }
}

TEST(Descend, RejectsBadInput) {
  const auto p = random_prompts(sphere_spec(6, 2), 1, 5, 6).front();
  EnergyModel m = model_for(p, EnergyKind::LogSumExp, 1.0, 1.0);
  EXPECT_THROW(descend(m, p.query, 1.0, -1), std::invalid_argument);
  EXPECT_THROW(descend(m, Vector::Zero(5), 1.0, 1), std::invalid_argument);
  m.beta = 0.0;
  EXPECT_THROW(energy(m, p.query), std::invalid_argument);
  m.kind = EnergyKind::NaiveSphericalHopfield;
  EXPECT_NO_THROW(energy(m, p.query));
}

TEST(JacobianSymmetry, ZeroForScaledIdentity) {
  RngStream rng(7, 0);
  for (const auto& p : random_prompts(sphere_spec(8, 3, 1.0, 0.2), 10, 12, 7)) {
    const auto w = AttentionWeights::scaled_identity(AttentionKind::Softmax, 8, rng.uniform(0.2, 3.0),
                                                     rng.uniform(-5.0, 5.0));
    EXPECT_LT(jacobian_symmetry_residual(w, p.context, p.query), 1e-13);
  }
}

TEST(JacobianSymmetry, NonzeroForGenericWeights) {
  RngStream rng(8, 0);
  const auto p = random_prompts(sphere_spec(8, 3, 1.0, 0.2), 1, 12, 8).front();
  const auto w = test::random_weights(AttentionKind::Softmax, 8, 1.0, rng);
  EXPECT_GT(jacobian_symmetry_residual(w, p.context, p.query), 1e-3);
  const auto lin = AttentionWeights::scaled_identity(AttentionKind::Linear, 8, 1.0, 1.0);
  EXPECT_THROW(jacobian_symmetry_residual(lin, p.context, p.query), std::invalid_argument);
}

}  // namespace
}  // namespace icd
