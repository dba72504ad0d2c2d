#include <gtest/gtest.h>

#include <cmath>

#include "icd/baselines.hpp"
#include "support.hpp"

namespace icd {
namespace {

using test::linear_spec;
using test::mixture_spec;
using test::sphere_spec;

TEST(BayesLinear, ClosedFormMse) {
  EXPECT_NEAR(bayes_linear_mse(linear_spec()), 16.0 / 3.0, 1e-15);
  EXPECT_NEAR(bayes_linear_mse(linear_spec(10, 3, 1.0, 1.0)), 1.5, 1e-15);
}

TEST(BayesLinear, ShrinksProjectedQuery) {
  RngStream rng(1, 0);
  const TaskInstance t = sample_task(linear_spec(), rng);
  const Vector q = rng.gaussian_vector(16);
  EXPECT_LT((bayes_linear(t, q) - (2.0 / 3.0) * t.projector() * q).norm(), 1e-13);
}

TEST(BayesLinear, MonteCarloMatchesClosedForm) {
  const TaskSpec s = linear_spec();
  const auto eps = sample_dataset(s, 4000, 2, RngStream(2, 0));
  const MeanStat m = evaluate_baseline(BaselineKind::BayesLinear, eps);
  EXPECT_NEAR(m.mean, 16.0 / 3.0, 4.0 * m.std_error);
}

TEST(BayesSphere, MatchesQuadratureOnCircle) {
  // d = 1: posterior over the angle, integrated with the periodic trapezoid rule.
  RngStream rng(3, 0);
  for (double sz : {0.05, 0.5, 3.0}) {
    const TaskInstance t = sample_task(sphere_spec(5, 1, 1.3, sz), rng);
    const Vector q = 0.8 * rng.gaussian_vector(5);
    const Vector c = t.basis.transpose() * q;
    const int m = 20000;
    double z = 0.0;
    Vector num = Vector::Zero(2);
    double peak = -1e300;
    for (int i = 0; i < m; ++i) {
      const double th = 2.0 * M_PI * i / m;
      peak = std::max(peak, 1.3 * (c(0) * std::cos(th) + c(1) * std::sin(th)) / sz);
    }
    for (int i = 0; i < m; ++i) {
      const double th = 2.0 * M_PI * i / m;
      Vector x(2);
      x << 1.3 * std::cos(th), 1.3 * std::sin(th);
      const double w = std::exp(x.dot(c) / sz - peak);
      z += w;
      num += w * x;
    }
    const Vector want = t.basis * (num / z);
    EXPECT_LT((bayes_sphere(t, q) - want).norm(), 1e-10) << "sz=" << sz;
  }
}

TEST(BayesSphere, MatchesImportanceSamplingInHigherDimension) {
  RngStream rng(4, 0);
  const TaskInstance t = sample_task(sphere_spec(8, 3, 1.0, 0.5), rng);
  const Vector q = t.basis * rng.gaussian_vector(4) * 0.6 + 0.3 * rng.gaussian_vector(8);
  const int m = 400000;
  Vector num = Vector::Zero(8);
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    const Vector x = sample_token(t, rng);
    const double w = std::exp(x.dot(q) / 0.5);
    z += w;
    num += w * x;
  }
  EXPECT_LT((bayes_sphere(t, q) - num / z).norm(), 5e-3);
}

TEST(BayesSphere, NormBelowRadiusAlongProjectedQuery) {
  RngStream rng(5, 0);
  for (int i = 0; i < 50; ++i) {
    const TaskInstance t = sample_task(sphere_spec(16, 8, 2.0, 0.3), rng);
    const Vector q = rng.gaussian_vector(16);
    const Vector m = bayes_sphere(t, q);
    const Vector par = t.projector() * q;
    EXPECT_LT(m.norm(), 2.0);
    EXPECT_NEAR(m.normalized().dot(par.normalized()), 1.0, 1e-12);
  }
}

TEST(BayesSphere, ZeroProjectionGivesZero) {
  RngStream rng(6, 0);
  const TaskInstance t = sample_task(sphere_spec(6, 1), rng);
  const Matrix p = t.projector();
  const Vector q = (Matrix::Identity(6, 6) - p) * rng.gaussian_vector(6);
  const auto old = log_level();
  set_log_level(LogLevel::Quiet);
  const Vector out = bayes_sphere(t, (Matrix::Identity(6, 6) - p) * q);
  set_log_level(old);
  EXPECT_LT(out.norm(), 1e-12);
}

TEST(BayesSphere, SmallNoiseRecoversCleanPoint) {
  RngStream rng(7, 0);
  const TaskInstance t = sample_task(sphere_spec(16, 8, 1.0, 1e-9), rng);
  const Vector x = sample_token(t, rng);
  EXPECT_LT((bayes_sphere(t, x) - x).norm(), 1e-6);
}

Vector mixture_posterior_oracle(const TaskInstance& t, const Vector& q) {
  const TaskSpec& s = t.spec;
  const std::vector<double> w = s.mixture_weights();
  std::vector<double> logr(static_cast<std::size_t>(s.k));
  double peak = -1e300;
  for (Index a = 0; a < s.k; ++a) {
    const double v = s.component_variance(a) + s.sigmaZ_sq;
    logr[a] = std::log(w[a]) - 0.5 * s.n * std::log(2 * M_PI * v) - (q - t.centers.col(a)).squaredNorm() / (2 * v);
    peak = std::max(peak, logr[a]);
  }
  double z = 0.0;
  Vector out = Vector::Zero(s.n);
  for (Index a = 0; a < s.k; ++a) {
    const double r = std::exp(logr[a] - peak);
    const double sa = s.component_variance(a);
    z += r;
    out += r * (sa * q + s.sigmaZ_sq * t.centers.col(a)) / (sa + s.sigmaZ_sq);
  }
  return out / z;
}

TEST(BayesMixture, EqualVarianceMatchesDirectPosterior) {
  RngStream rng(8, 0);
  for (int i = 0; i < 20; ++i) {
    TaskSpec s = mixture_spec(16, 8, 0.3, 0.2);
    s.radius = 1.5;
    const TaskInstance t = sample_task(s, rng);
    const Vector q = sample_token(t, rng) + std::sqrt(0.2) * rng.gaussian_vector(16);
    EXPECT_LT((bayes_mixture(t, q) - mixture_posterior_oracle(t, q)).norm(), 1e-12);
  }
}

TEST(BayesMixture, PerComponentVariancesMatchImportanceSampling) {
  // Prior samples weighted by the Gaussian likelihood of the query.
  RngStream rng(9, 0);
  TaskSpec s = mixture_spec(2, 3, 0.1, 0.3);
  s.weights = {0.5, 0.3, 0.2};
  s.component_sigma_sq = {0.05, 0.4, 1.0};
  const TaskInstance t = sample_task(s, rng);
  const Vector q = (Vector(2) << 0.4, -0.7).finished();
  const int m = 400000;
  Vector num = Vector::Zero(2);
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    const Vector x = sample_token(t, rng);
    const double w = std::exp(-(q - x).squaredNorm() / (2 * 0.3));
    z += w;
    num += w * x;
  }
  EXPECT_LT((bayes_mixture(t, q) - num / z).norm(), 1e-2);
  EXPECT_LT((bayes_mixture(t, q) - mixture_posterior_oracle(t, q)).norm(), 1e-12);
}

TEST(BayesMixture, ZeroVarianceLimit) {
  RngStream rng(10, 0);
  const TaskInstance t = sample_task(mixture_spec(16, 8, 1e-10, 0.1), rng);
  const Vector q = rng.gaussian_vector(16) * 0.5;
  EXPECT_LT((bayes_mixture(t, q) - bayes_mixture_zerovar(t, q)).norm(), 1e-7);
}

TEST(EmpiricalProjector, ConvergesToProjector) {
  RngStream rng(11, 0);
  const TaskInstance t = sample_task(linear_spec(), rng);
  double prev = 1e300;
  for (Index l : {100, 1000, 10000}) {
    const Prompt p = sample_prompt(t, l, rng);
    const double err = (empirical_projector(p.context, 2.0) - t.projector()).norm();
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 0.15);
}

TEST(Baselines, ApplicabilityAndDispatch) {
  EXPECT_EQ(baselines_for(TaskCase::LinearSubspace).front(), BaselineKind::Zero);
  EXPECT_TRUE(applies_to(BaselineKind::BayesSphere, TaskCase::Sphere));
  EXPECT_FALSE(applies_to(BaselineKind::BayesSphere, TaskCase::LinearSubspace));
  const Episode e = sample_episode(linear_spec(), 3, RngStream(12, 0), 0);
  EXPECT_THROW(predict_baseline(BaselineKind::BayesSphere, e.task, e.prompt), std::invalid_argument);
  EXPECT_EQ(predict_baseline(BaselineKind::Zero, e.task, e.prompt), Vector::Zero(16));
}

TEST(Baselines, BayesIsBestOnEveryCase) {
  // Property: over a shared episode set, the case's Bayes estimator has the
  // lowest MSE of every applicable baseline (up to sampling error).
  const std::pair<TaskSpec, BaselineKind> cases[] = {
      {linear_spec(), BaselineKind::BayesLinear},
      {sphere_spec(16, 4, 1.0, 0.2), BaselineKind::BayesSphere},
      {mixture_spec(16, 4, 0.05, 0.2), BaselineKind::BayesMixtureGeneral},
  };
  for (const auto& [spec, best] : cases) {
    const auto eps = sample_dataset(spec, 1500, 50, RngStream(13, 0));
    const double bayes = evaluate_baseline(best, eps).mean;
    for (BaselineKind k : baselines_for(spec.task_case)) {
      if (k == best) continue;
      const auto other = evaluate_baseline(k, eps);
      EXPECT_LT(bayes, other.mean + 2.0 * other.std_error) << to_string(k);
    }
  }
}

TEST(Baselines, ZeroPredictorEqualsSignalPower) {
  const auto lin = sample_dataset(linear_spec(), 3000, 1, RngStream(14, 0));
  const MeanStat z = evaluate_baseline(BaselineKind::Zero, lin);
  EXPECT_NEAR(z.mean, 16.0, 4.0 * z.std_error);
  const auto sph = sample_dataset(sphere_spec(), 50, 1, RngStream(15, 0));
  EXPECT_NEAR(evaluate_baseline(BaselineKind::Zero, sph).mean, 1.0, 1e-12);
}

}  // namespace
}  // namespace icd
