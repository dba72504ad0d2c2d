#pragma once

// Shared generators and oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "icd/attention.hpp"
#include "icd/numerics.hpp"
#include "icd/tasks.hpp"

namespace icd::test {

inline TaskSpec linear_spec(Index n = 16, Index d = 8, double s0 = 2.0, double sz = 1.0) {
  TaskSpec s;
  s.task_case = TaskCase::LinearSubspace;
  s.n = n;
  s.d = d;
  s.sigma0_sq = s0;
  s.sigmaZ_sq = sz;
  return s;
}

inline TaskSpec sphere_spec(Index n = 16, Index d = 8, double radius = 1.0, double sz = 0.1) {
  TaskSpec s;
  s.task_case = TaskCase::Sphere;
  s.n = n;
  s.d = d;
  s.radius = radius;
  s.sigmaZ_sq = sz;
  return s;
}

inline TaskSpec mixture_spec(Index n = 16, Index k = 8, double s0 = 0.02, double sz = 0.1) {
  TaskSpec s;
  s.task_case = TaskCase::GaussianMixture;
  s.n = n;
  s.k = k;
  s.radius = 1.0;
  s.sigma0_sq = s0;
  s.sigmaZ_sq = sz;
  return s;
}

/// Uniform random n x n matrix with entries in [-scale, scale].
inline Matrix random_matrix(Index n, double scale, RngStream& rng) {
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) m(i, j) = rng.uniform(-scale, scale);
  }
  return m;
}

inline AttentionWeights random_weights(AttentionKind kind, Index n, double scale, RngStream& rng) {
  AttentionWeights w;
  w.kind = kind;
  w.kq = random_matrix(n, scale, rng);
  w.pv = random_matrix(n, scale, rng);
  return w;
}

inline std::vector<Prompt> random_prompts(const TaskSpec& spec, Index count, Index length, std::uint64_t seed) {
  const RngStream root(seed, 77);
  std::vector<Prompt> out;
  for (Index i = 0; i < count; ++i) out.push_back(sample_episode(spec, length, root, static_cast<std::uint64_t>(i)).prompt);
  return out;
}

/// Central difference of f along every entry of m (restored afterwards).
inline Matrix numeric_gradient(Matrix& m, const std::function<double()>& f, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double keep = m(i, j);
      m(i, j) = keep + h;
      const double up = f();
      m(i, j) = keep - h;
      const double down = f();
      m(i, j) = keep;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// Largest entrywise |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-3) {
  double worst = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      const double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  }
  return worst;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("icd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace icd::test
