#pragma once

// Random streams, Haar samplers and the small set of stable special
// functions used by the rest of the library.
//
// Matrices are Eigen::MatrixXd (column-major). Token sequences are stored
// one token per column, so a context of L tokens in R^n is an n x L matrix.

#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

namespace icd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Seeded xoshiro256** generator keyed by (seed, stream-id).
///
/// Equal keys replay the same integer sequence on every platform. Child
/// streams come from `substream(i)`, which hashes the parent stream id with
/// `i`; the parent state is not consumed, so substreams are independent of
/// the order in which they are created or used.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  RngStream substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  Matrix gaussian_matrix(Index rows, Index cols);
  Vector gaussian_vector(Index n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Throws std::invalid_argument if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& m, std::string_view what);

Vector softmax_stable(const Eigen::Ref<const Vector>& v);
double log_sum_exp(const Eigen::Ref<const Vector>& v);

/// I_{nu+1}(z) / I_nu(z) for nu >= -1/2, z >= 0.
///
/// Evaluated from the Gauss continued fraction with modified Lentz
/// (tolerance 1e-14, at most 500 terms). For large z, where the fraction
/// needs more terms than that, the ratio of the Hankel asymptotic series is
/// used instead. Never forms I_nu itself, which overflows near z ~ 700.
double bessel_ratio(double nu, double z);

/// n x k matrix with orthonormal columns, Haar distributed: QR of a Gaussian
/// matrix with each column's sign chosen so that diag(R) > 0.
Matrix random_orthonormal_basis(Index n, Index k, RngStream& rng);
Matrix random_orthogonal(Index n, RngStream& rng);

/// Compensated running sum; accumulation order is the call order.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = sum_ + y;
    c_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

/// Mean and standard error of the mean, accumulated in a fixed order.
struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
  Index count = 0;
};

class MeanAccumulator {
 public:
  void add(double x) {
    sum_.add(x);
    ++n_;
    const double delta = x - welford_mean_;
    welford_mean_ += delta / static_cast<double>(n_);
    welford_m2_ += delta * (x - welford_mean_);
  }
  MeanStat result() const;

 private:
  KahanSum sum_;
  double welford_mean_ = 0.0;
  double welford_m2_ = 0.0;
  Index n_ = 0;
};

enum class LogLevel { Quiet, Warn, Info };
void set_log_level(LogLevel level);
LogLevel log_level();
void log_warn(std::string_view message);
void log_info(std::string_view message);

}  // namespace icd
