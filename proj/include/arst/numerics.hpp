#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "arst/mask.hpp"

namespace arst {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Dense row-major matrix. Scalar is float for training/inference and double
// for gradient verification.
template <typename Scalar>
class Matrix {
 public:
  using value_type = Scalar;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Scalar fill = Scalar(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<Scalar> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
      std::size_t j = 0;
      for (Scalar v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  Scalar operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<Scalar> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const Scalar> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_string() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Scalar> data_;
};

template <typename To, typename From>
Matrix<To> matrix_cast(const Matrix<From>& m) {
  std::vector<To> out(m.data().begin(), m.data().end());
  return Matrix<To>(m.rows(), m.cols(), std::move(out));
}

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(Scalar(0)); }
};

// SplitMix64. The integer stream is bit-exact on every platform; derived
// floating-point draws go through <cmath> and inherit its accuracy.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling avoids modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("SeededRng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; one draw per call, the paired value is discarded so the
  // stream position depends only on the number of calls.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Number of failures before the first success, success probability p.
  std::uint64_t geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("SeededRng::geometric: p out of (0,1]");
    if (p == 1.0) return 0;
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Seed for an independent sub-stream, e.g. one per video.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  SeededRng rng(master ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
  return rng.next_u64();
}

template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix<Scalar> c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Scalar* out = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Scalar aik = a(i, k);
      const Scalar* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A^T B
template <typename Scalar>
Matrix<Scalar> matmul_tn(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: shape mismatch " + a.shape_string() + "^T x " + b.shape_string());
  }
  Matrix<Scalar> c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const Scalar* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const Scalar aki = a(k, i);
      Scalar* out = c.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

// C = A B^T
template <typename Scalar>
Matrix<Scalar> matmul_nt(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: shape mismatch " + a.shape_string() + " x " + b.shape_string() + "^T");
  }
  Matrix<Scalar> c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const Scalar* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const Scalar* brow = b.row(j).data();
      Scalar s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

template <typename Scalar>
void add_inplace(Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: shape mismatch " + a.shape_string() + " + " + b.shape_string());
  }
  auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

// Softmax of each query row over the keys the mask allows. Disallowed entries
// act as an additive -inf and come out exactly zero.
template <typename Scalar>
Matrix<Scalar> masked_softmax_rows(const Matrix<Scalar>& scores, const BandedCausalMask& mask) {
  Matrix<Scalar> out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (!mask.allowed0(i, j)) continue;
      any = true;
      mx = std::max(mx, scores(i, j));
    }
    if (!any) {
      throw InvariantError("masked_softmax_rows: row " + std::to_string(i) + " has no allowed keys");
    }
    Scalar sum = 0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (!mask.allowed0(i, j)) continue;
      const Scalar e = std::exp(scores(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < scores.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

template <typename Scalar>
std::vector<Scalar> softmax(std::span<const Scalar> logits) {
  std::vector<Scalar> p(logits.size());
  if (logits.empty()) return p;
  Scalar mx = logits[0];
  for (Scalar v : logits) mx = std::max(mx, v);
  Scalar sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Biased-variance layer norm of a single row vector.
template <typename Scalar>
std::vector<Scalar> layer_norm(std::span<const Scalar> x, std::span<const Scalar> gamma,
                               std::span<const Scalar> beta, Scalar eps) {
  if (gamma.size() != x.size() || beta.size() != x.size()) {
    throw DimensionError("layer_norm: dimension mismatch x=" + std::to_string(x.size()) +
                         " gamma=" + std::to_string(gamma.size()) +
                         " beta=" + std::to_string(beta.size()));
  }
  const std::size_t d = x.size();
  Scalar mean = 0;
  for (Scalar v : x) mean += v;
  mean /= static_cast<Scalar>(d);
  Scalar var = 0;
  for (Scalar v : x) var += (v - mean) * (v - mean);
  var /= static_cast<Scalar>(d);
  const Scalar inv = Scalar(1) / std::sqrt(var + eps);
  std::vector<Scalar> y(d);
  for (std::size_t i = 0; i < d; ++i) y[i] = gamma[i] * (x[i] - mean) * inv + beta[i];
  return y;
}

// Index of the maximum entry; ties resolve to the lowest index.
template <typename Scalar>
std::size_t argmax(std::span<const Scalar> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

template <typename Scalar>
bool all_finite(const Matrix<Scalar>& m) {
  for (Scalar v : m.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace arst
