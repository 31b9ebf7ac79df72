// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "lbforecast/errors.hpp"

namespace lbf {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto s : shape_) {
    if (s == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto s : shape_) {
    if (s == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t m = rows.size();
  std::size_t k = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * k);
  for (const auto& r : rows) {
    if (r.size() != k) throw ShapeError("ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({m, k}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - next_unit();
  double u2 = next_unit();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Tensor gaussian(Rng& rng, const Shape& shape, double std) {
  if (!(std >= 0.0)) throw ParameterError("gaussian std must be >= 0");
  Tensor out(shape);
  for (auto& v : out.data()) v = std * rng.next_normal();
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2) throw DimensionError("matmul expects a matrix right operand");
  const std::size_t k = a.cols();
  if (k != b.shape()[0]) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " . " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.rows();
  const std::size_t p = b.shape()[1];
  Tensor out({m, p});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = po + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor vecmat(const Tensor& v, const Tensor& b) {
  Tensor row = v.reshaped({1, v.numel()});
  Tensor out = matmul(row, b);
  return out.reshaped({out.numel()});
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out = a;
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* row = out.data().data() + r * n;
    double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  }
  return out;
}

Tensor layernorm(const Tensor& a, double eps) {
  Tensor out = a;
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* row = out.data().data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) row[j] = (row[j] - mu) * inv;
  }
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += alpha * x[i];
}

Tensor mul_rows(const Tensor& a, const Tensor& v) {
  const std::size_t n = a.cols();
  if (v.numel() != n) throw ShapeError("mul_rows: vector length does not match trailing dimension");
  Tensor out = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] *= v[j];
  }
  return out;
}

Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale_v) {
  const std::size_t n = x.cols();
  if (shift.numel() != n || scale_v.numel() != n) throw ShapeError("modulate: conditioning width mismatch");
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      double& v = out[r * n + j];
      v = v * (1.0 + scale_v[j]) + shift[j];
    }
  }
  return out;
}

Tensor silu(const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.data()) v = v / (1.0 + std::exp(-v));
  return out;
}

Tensor gelu(const Tensor& a) {
  // tanh approximation
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  Tensor out = a;
  for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v)));
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t n = a.cols();
  if (begin + count > n || count == 0) throw DimensionError("slice_cols out of range");
  if (a.rank() == 1) {
    std::vector<double> d(a.data().begin() + begin, a.data().begin() + begin + count);
    return Tensor({count}, std::move(d));
  }
  Tensor out({a.rows(), count});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < count; ++j) out.at(r, j) = a[r * n + begin + j];
  }
  return out;
}

double norm_l2(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double norm_l1(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v);
  return s;
}

double mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return a.numel() ? s / static_cast<double>(a.numel()) : 0.0;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t content_hash(const Tensor& a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : a.data()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace lbf
