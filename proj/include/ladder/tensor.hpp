#ifndef LADDER_TENSOR_HPP_
#define LADDER_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ladder/errors.hpp"

namespace ladder {

/// Dense row-major n-dimensional array. Rank 1..3 is what the models use
/// (vectors, [batch x width] matrices, [batch x channels x frames] stacks).
template <typename Real>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<Real> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {
    if (element_count(shape) != data.size())
      throw DimensionError("tensor data length does not match shape");
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return s.empty() ? 0 : n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = element_count(s);
    return Tensor(std::move(s), std::vector<Real>(n, Real(0)));
  }

  static Tensor full(std::vector<std::size_t> s, Real value) {
    std::size_t n = element_count(s);
    return Tensor(std::move(s), std::vector<Real>(n, value));
  }

  static Tensor vector(std::initializer_list<Real> v) {
    return Tensor({v.size()}, std::vector<Real>(v));
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::initializer_list<Real> v) {
    return Tensor({r, c}, std::vector<Real>(v));
  }

  static Tensor identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = Real(1);
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const {
    require_rank(2);
    return shape[0];
  }
  std::size_t cols() const {
    require_rank(2);
    return shape[1];
  }

  Real& operator()(std::size_t i) { return data[i]; }
  Real operator()(std::size_t i) const { return data[i]; }
  Real& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  Real& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  Real operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  void require_rank(std::size_t r) const {
    if (shape.size() != r)
      throw DimensionError("expected rank-" + std::to_string(r) + " tensor, got rank-" +
                           std::to_string(shape.size()));
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

template <typename Real>
bool all_finite(const Tensor<Real>& t) {
  for (Real v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template <typename Real>
void require_finite(const Tensor<Real>& t, const char* what) {
  if (!all_finite(t)) throw DivergenceError(std::string("non-finite values in ") + what);
}

namespace detail {
template <typename Real>
using EigenMap =
    Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Real>
using ConstEigenMap =
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename Real>
ConstEigenMap<Real> as_eigen(const Tensor<Real>& t) {
  t.require_rank(2);
  return ConstEigenMap<Real>(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                             static_cast<Eigen::Index>(t.shape[1]));
}

template <typename Real>
EigenMap<Real> as_eigen(Tensor<Real>& t) {
  t.require_rank(2);
  return EigenMap<Real>(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                        static_cast<Eigen::Index>(t.shape[1]));
}
}  // namespace detail

/// C = A x B with A [m x k], B [k x n].
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  a.require_rank(2);
  b.require_rank(2);
  if (a.shape[1] != b.shape[0])
    throw DimensionError("matmul inner extents differ: " + a.shape_str() + " x " + b.shape_str());
  Tensor<Real> c = Tensor<Real>::zeros({a.shape[0], b.shape[1]});
  detail::as_eigen(c).noalias() = detail::as_eigen(a) * detail::as_eigen(b);
  return c;
}

/// C = A x B^T with A [m x k], B [n x k].
template <typename Real>
Tensor<Real> matmul_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
  a.require_rank(2);
  b.require_rank(2);
  if (a.shape[1] != b.shape[1])
    throw DimensionError("matmul_nt inner extents differ: " + a.shape_str() + " x " +
                         b.shape_str() + "^T");
  Tensor<Real> c = Tensor<Real>::zeros({a.shape[0], b.shape[0]});
  detail::as_eigen(c).noalias() = detail::as_eigen(a) * detail::as_eigen(b).transpose();
  return c;
}

/// C = A^T x B with A [k x m], B [k x n].
template <typename Real>
Tensor<Real> matmul_tn(const Tensor<Real>& a, const Tensor<Real>& b) {
  a.require_rank(2);
  b.require_rank(2);
  if (a.shape[0] != b.shape[0])
    throw DimensionError("matmul_tn inner extents differ: " + a.shape_str() + "^T x " +
                         b.shape_str());
  Tensor<Real> c = Tensor<Real>::zeros({a.shape[1], b.shape[1]});
  detail::as_eigen(c).noalias() = detail::as_eigen(a).transpose() * detail::as_eigen(b);
  return c;
}

/// Column sums of a [rows x cols] matrix, as a rank-1 tensor of length cols.
template <typename Real>
Tensor<Real> col_sum(const Tensor<Real>& a) {
  a.require_rank(2);
  Tensor<Real> out = Tensor<Real>::zeros({a.shape[1]});
  for (std::size_t i = 0; i < a.shape[0]; ++i)
    for (std::size_t j = 0; j < a.shape[1]; ++j) out.data[j] += a(i, j);
  return out;
}

/// Adds a length-cols row vector to every row of a matrix, in place.
template <typename Real>
void add_row_vector(Tensor<Real>& a, const Tensor<Real>& v) {
  a.require_rank(2);
  v.require_rank(1);
  if (a.shape[1] != v.shape[0]) throw DimensionError("row vector width mismatch");
  for (std::size_t i = 0; i < a.shape[0]; ++i)
    for (std::size_t j = 0; j < a.shape[1]; ++j) a(i, j) += v(j);
}

/// Deterministic counter-based random stream (splitmix64 finalizer with the
/// Weyl increment 0x9E3779B97F4A7C15). Identical seeds give identical draw
/// sequences; independent substreams come from fork().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe as a log() argument.
  double next_open() { return 1.0 - next_unit(); }

  /// Standard normal draw via Box-Muller; the second value of the pair is
  /// cached so consecutive draws cost one transform per two values.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_open();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Unbiased uniform integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw ParameterError("next_below requires n > 0");
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t v = next_u64();
      if (v >= threshold) return v % n;
    }
  }

  /// Derives an independent stream from the original seed and a stream label.
  RngStream fork(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ (0xA0761D6478BD642Full * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return RngStream(z ^ (z >> 31));
  }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = next_below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. draws from N(0, sigma^2); sigma = 0 yields an all-zero tensor.
template <typename Real>
Tensor<Real> sample_gaussian(std::vector<std::size_t> shape, double sigma, RngStream& rng) {
  if (sigma < 0) throw ParameterError("gaussian sigma must be nonnegative");
  Tensor<Real> t = Tensor<Real>::zeros(std::move(shape));
  if (sigma == 0) return t;
  for (Real& v : t.data) v = static_cast<Real>(sigma * rng.next_gaussian());
  return t;
}

/// Uniform draws in [lo, hi).
template <typename Real>
Tensor<Real> sample_uniform(std::vector<std::size_t> shape, double lo, double hi, RngStream& rng) {
  if (!(hi >= lo)) throw ParameterError("uniform range must satisfy hi >= lo");
  Tensor<Real> t = Tensor<Real>::zeros(std::move(shape));
  for (Real& v : t.data) v = static_cast<Real>(lo + (hi - lo) * rng.next_unit());
  return t;
}

}  // namespace ladder

#endif  // LADDER_TENSOR_HPP_
