#include "icd/numerics.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace icd {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::atomic<LogLevel> g_log_level{LogLevel::Warn};

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::uint64_t x = splitmix64(seed) ^ splitmix64(stream_id ^ 0xD1B54A32D192ED03ULL);
  for (auto& word : s_) {
    x = splitmix64(x);
    word = x;
  }
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RngStream RngStream::substream(std::uint64_t index) const {
  const std::uint64_t child =
      splitmix64(stream_id_ * 0xA24BAED4963EE407ULL + splitmix64(index + 1));
  return RngStream(seed_, child);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

std::uint64_t RngStream::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RngStream::below: bound must be positive");
  // Lemire's nearly-divisionless method with rejection.
  __uint128_t m = static_cast<__uint128_t>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<__uint128_t>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

Matrix RngStream::gaussian_matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  // Fill in storage order so replay does not depend on Eigen's traversal.
  double* data = m.data();
  for (Index i = 0; i < rows * cols; ++i) data[i] = normal();
  return m;
}

Vector RngStream::gaussian_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

void require_finite(const Eigen::Ref<const Matrix>& m, std::string_view what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

Vector softmax_stable(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw std::invalid_argument("softmax_stable: empty vector");
  require_finite(v, "softmax_stable");
  const double shift = v.maxCoeff();
  Vector p = (v.array() - shift).exp().matrix();
  p /= p.sum();
  return p;
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw std::invalid_argument("log_sum_exp: empty vector");
  require_finite(v, "log_sum_exp");
  const double shift = v.maxCoeff();
  return shift + std::log((v.array() - shift).exp().sum());
}

namespace {

constexpr double kBesselTol = 1e-14;
constexpr int kBesselMaxTerms = 500;

// I_{nu+1}/I_nu = 1 / (b_1 + 1 / (b_2 + 1 / (b_3 + ...))), b_j = 2 (nu + j) / z.
// Returns false if the fraction has not converged within max_terms.
bool bessel_ratio_cf(double nu, double z, int max_terms, double& out) {
  constexpr double tiny = 1e-300;
  double f = tiny;
  double c = f;
  double d = 0.0;
  for (int j = 1; j <= max_terms; ++j) {
    const double b = 2.0 * (nu + j) / z;
    d = b + d;
    if (d == 0.0) d = tiny;
    c = b + 1.0 / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < kBesselTol) {
      out = f;
      return true;
    }
  }
  out = f;
  return false;
}

// Hankel series S_nu(z) = sum_k (-1)^k a_k(nu) / z^k with
// I_nu(z) ~ e^z / sqrt(2 pi z) * S_nu(z). Summed until the terms stop
// shrinking; `smallest` reports the magnitude of the last term used.
double hankel_series(double nu, double z, double& smallest) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  smallest = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * z);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    smallest = std::abs(term);
    if (smallest < 1e-17) break;
  }
  return sum;
}

}  // namespace

double bessel_ratio(double nu, double z) {
  if (!std::isfinite(z) || !std::isfinite(nu)) {
    throw std::invalid_argument("bessel_ratio: non-finite argument");
  }
  if (z < 0.0) throw std::invalid_argument("bessel_ratio: z must be >= 0");
  if (nu < -0.5) throw std::invalid_argument("bessel_ratio: nu must be >= -1/2");
  if (z == 0.0) return 0.0;

  double ratio = 0.0;
  if (bessel_ratio_cf(nu, z, kBesselMaxTerms, ratio)) return ratio;

  double small_num = 0.0;
  double small_den = 0.0;
  const double num = hankel_series(nu + 1.0, z, small_num);
  const double den = hankel_series(nu, z, small_den);
  if (std::max(small_num, small_den) < 1e-15) return num / den;

  // Large order and large argument together: keep extending the fraction.
  log_warn("bessel_ratio: continued fraction needs more than 500 terms (nu=" +
           std::to_string(nu) + ", z=" + std::to_string(z) + ")");
  bessel_ratio_cf(nu, z, 200 * kBesselMaxTerms, ratio);
  return ratio;
}

Matrix random_orthonormal_basis(Index n, Index k, RngStream& rng) {
  if (n < 1 || k < 1) throw std::invalid_argument("random_orthonormal_basis: dims must be >= 1");
  if (k > n) throw std::invalid_argument("random_orthonormal_basis: k must be <= n");
  const Matrix g = rng.gaussian_matrix(n, k);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Matrix random_orthogonal(Index n, RngStream& rng) { return random_orthonormal_basis(n, n, rng); }

MeanStat MeanAccumulator::result() const {
  MeanStat out;
  out.count = n_;
  if (n_ == 0) return out;
  out.mean = sum_.value() / static_cast<double>(n_);
  if (n_ > 1) {
    const double variance = welford_m2_ / static_cast<double>(n_ - 1);
    out.std_error = std::sqrt(variance / static_cast<double>(n_));
  }
  return out;
}

void set_log_level(LogLevel level) { g_log_level.store(level); }
LogLevel log_level() { return g_log_level.load(); }

void log_warn(std::string_view message) {
  if (log_level() >= LogLevel::Warn) std::clog << "[icd] warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (log_level() >= LogLevel::Info) std::clog << "[icd] " << message << '\n';
}

}  // namespace icd
