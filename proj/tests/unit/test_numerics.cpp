#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "icd/numerics.hpp"
#include "support.hpp"

namespace icd {
namespace {

// log I_nu(z) from the power series, summed in log space so large z does
// not overflow. Independent of the continued fraction under test.
double log_bessel_i_series(double nu, double z) {
  const double lz = std::log(z / 2.0);
  std::vector<double> logs;
  double peak = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20000; ++k) {
    const double t = (2.0 * k + nu) * lz - std::lgamma(k + 1.0) - std::lgamma(k + nu + 1.0);
    logs.push_back(t);
    peak = std::max(peak, t);
    if (k > z && t < peak - 60.0) break;
  }
  long double s = 0.0L;
  for (double t : logs) s += std::exp(static_cast<long double>(t - peak));
  return peak + static_cast<double>(std::log(s));
}

double bessel_ratio_oracle(double nu, double z) {
  return std::exp(log_bessel_i_series(nu + 1.0, z) - log_bessel_i_series(nu, z));
}

TEST(RngStream, SameKeyReplaysSameSequence) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DifferentStreamsDiffer) {
  RngStream a(42, 7), b(42, 8), c(43, 7);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStream, SubstreamIgnoresParentStateAndCreationOrder) {
  RngStream parent(5, 1);
  const RngStream early = parent.substream(3);
  for (int i = 0; i < 50; ++i) parent.next_u64();
  RngStream other = parent.substream(9);
  RngStream late = parent.substream(3);
  RngStream e = early;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(e.next_u64(), late.next_u64());
  EXPECT_NE(RngStream(early).next_u64(), other.next_u64());
}

TEST(RngStream, UniformStaysInUnitInterval) {
  RngStream rng(1, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStream, NormalPassesKolmogorovSmirnov) {
  RngStream rng(2, 0);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = rng.normal();
  const double d = test::ks_statistic(xs, test::normal_cdf);
  EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(xs.size())));  // 1% level
}

TEST(RngStream, BelowIsUniform) {
  RngStream rng(3, 0);
  const int k = 7, n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(k);
    ASSERT_LT(v, static_cast<std::uint64_t>(k));
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += std::pow(c - n / k, 2) / (n / k);
  EXPECT_LT(chi2, 16.81);  // chi2(6) at 1%
}

TEST(RngStream, GaussianMatrixFillsInStorageOrder) {
  RngStream a(4, 0), b(4, 0);
  const Matrix m = a.gaussian_matrix(3, 2);
  for (Index j = 0; j < 2; ++j) {
    for (Index i = 0; i < 3; ++i) EXPECT_EQ(m(i, j), b.normal());
  }
}

TEST(Softmax, StableForHugeLogits) {
  Vector v(3);
  v << 1000.0, 1001.0, -1e6;
  const Vector p = softmax_stable(v);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_NEAR(p(1) / p(0), std::exp(1.0), 1e-12);
  EXPECT_EQ(p(2), 0.0);
  EXPECT_NEAR(log_sum_exp(v), 1001.0 + std::log1p(std::exp(-1.0)), 1e-12);
}

TEST(Softmax, ShiftInvariance) {
  RngStream rng(5, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = rng.gaussian_vector(10) * 5.0;
    const double c = rng.uniform(-50.0, 50.0);
    const Vector shifted = (v.array() + c).matrix();
    EXPECT_LT((softmax_stable(v) - softmax_stable(shifted)).lpNorm<Eigen::Infinity>(), 1e-14);
    EXPECT_NEAR(log_sum_exp(shifted), log_sum_exp(v) + c, 1e-12);
  }
}

TEST(RequireFinite, RejectsNaNAndInf) {
  Matrix m = Matrix::Zero(2, 2);
  EXPECT_NO_THROW(require_finite(m, "m"));
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(require_finite(m, "m"), std::invalid_argument);
  m(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(require_finite(m, "m"), std::invalid_argument);
}

TEST(BesselRatio, OneOverZeroAtTen) {
  // Reference from the power series; also 0.94859985... to 8 digits.
  EXPECT_NEAR(bessel_ratio(0.0, 10.0), bessel_ratio_oracle(0.0, 10.0), 1e-13);
  EXPECT_NEAR(bessel_ratio(0.0, 10.0), 0.9485998, 1e-7);
}

TEST(BesselRatio, MatchesSeriesAcrossOrdersAndArguments) {
  for (double nu : {-0.5, 0.0, 0.5, 1.0, 3.5, 4.0, 10.0, 25.5}) {
    for (double z : {1e-3, 0.1, 1.0, 5.0, 20.0, 100.0, 400.0, 700.0, 1500.0}) {
      const double want = bessel_ratio_oracle(nu, z);
      EXPECT_NEAR(bessel_ratio(nu, z), want, 1e-11 * std::max(1.0, want)) << "nu=" << nu << " z=" << z;
    }
  }
}

TEST(BesselRatio, HalfOrderClosedForm) {
  // I_{1/2}/I_{-1/2} = tanh z.
  for (double z : {0.01, 0.5, 3.0, 30.0, 800.0}) EXPECT_NEAR(bessel_ratio(-0.5, z), std::tanh(z), 1e-13);
}

TEST(BesselRatio, LimitsAndDomain) {
  EXPECT_EQ(bessel_ratio(1.0, 0.0), 0.0);
  EXPECT_NEAR(bessel_ratio(2.0, 1e-6) / 1e-6, 1.0 / 6.0, 1e-9);  // z / (2(nu+1))
  EXPECT_NEAR(bessel_ratio(3.5, 1e5), 1.0 - 4.0 / 1e5, 1e-9);     // 1 - (2nu+1)/(2z)
  EXPECT_THROW(bessel_ratio(-1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(bessel_ratio(1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(bessel_ratio(1.0, std::nan("")), std::invalid_argument);
}

TEST(BesselRatio, MonotoneInZAndBelowOne) {
  for (double nu : {0.0, 3.5}) {
    double prev = 0.0;
    for (double z = 0.1; z < 2000.0; z *= 1.7) {
      const double r = bessel_ratio(nu, z);
      EXPECT_GT(r, prev);
      EXPECT_LT(r, 1.0);
      prev = r;
    }
  }
}

TEST(Haar, BasisIsOrthonormal) {
  RngStream rng(6, 0);
  for (Index k : {1, 3, 9, 16}) {
    const Matrix b = random_orthonormal_basis(16, k, rng);
    EXPECT_EQ(b.rows(), 16);
    EXPECT_EQ(b.cols(), k);
    EXPECT_LT((b.transpose() * b - Matrix::Identity(k, k)).norm(), 1e-12);
  }
}

TEST(Haar, FirstCoordinateUniformInThreeDimensions) {
  // A Haar column in R^3 is uniform on S^2, whose coordinates are U[-1, 1].
  RngStream rng(7, 0);
  std::vector<double> xs;
  for (int i = 0; i < 5000; ++i) xs.push_back(random_orthogonal(3, rng)(0, 0));
  const double d = test::ks_statistic(xs, [](double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); });
  EXPECT_LT(d, 1.63 / std::sqrt(5000.0));
}

TEST(Haar, DeterminantSignsBothOccur) {
  RngStream rng(8, 0);
  int positive = 0;
  for (int i = 0; i < 400; ++i) positive += random_orthogonal(4, rng).determinant() > 0.0;
  EXPECT_GT(positive, 150);
  EXPECT_LT(positive, 250);
}

TEST(MeanAccumulator, MatchesTwoPass) {
  RngStream rng(9, 0);
  std::vector<double> xs(1000);
  for (auto& x : xs) x = 1e6 + rng.normal();
  MeanAccumulator acc;
  for (double x : xs) acc.add(x);
  const MeanStat s = acc.result();
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(s.mean, mean, 1e-9);
  EXPECT_NEAR(s.std_error, std::sqrt(ss / (xs.size() - 1) / xs.size()), 1e-9);
  EXPECT_EQ(s.count, 1000);
}

TEST(KahanSum, RecoversSmallAddends) {
  KahanSum k;
  double naive = 0.0;
  k.add(1e16);
  naive += 1e16;
  for (int i = 0; i < 1000; ++i) {
    k.add(1.0);
    naive += 1.0;
  }
  EXPECT_EQ(k.value(), 1e16 + 1000.0);
  EXPECT_NE(naive, 1e16 + 1000.0);
}

}  // namespace
}  // namespace icd
