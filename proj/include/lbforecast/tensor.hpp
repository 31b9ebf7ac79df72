// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Dense 64-bit tensors and the handful of kernels the toy transformer needs.
// Every kernel uses a fixed summation order, so repeated calls on equal
// inputs are bit-identical.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lbf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  // Builds a 2-D tensor from nested rows; all rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Trailing dimension, and the product of all leading dimensions.
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : numel() / cols(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Same data, different shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// SplitMix64 stream. Identical seeds give identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double next_unit();
  // Standard normal via Box-Muller; both values of each pair are used,
  // cosine branch first.
  double next_normal();

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Tensor gaussian(Rng& rng, const Shape& shape, double std);

// [m x k] . [k x p] -> [m x p]; leading dims of `a` are flattened into m.
Tensor matmul(const Tensor& a, const Tensor& b);
// Row-vector times matrix: [k] . [k x p] -> [p].
Tensor vecmat(const Tensor& v, const Tensor& b);

Tensor softmax_rows(const Tensor& a);
// Normalizes every row over the trailing dimension; no affine parameters.
Tensor layernorm(const Tensor& a, double eps = 1e-6);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);
// Scales every row elementwise by `v` (length cols()).
Tensor mul_rows(const Tensor& a, const Tensor& v);
// x * (1 + scale) + shift, with scale and shift broadcast over rows.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale);
Tensor silu(const Tensor& a);
Tensor gelu(const Tensor& a);

// Column slice [begin, begin + count) of a 1-D or 2-D tensor.
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);

double norm_l2(const Tensor& a);
double norm_l1(const Tensor& a);
double mean(const Tensor& a);
bool all_finite(const Tensor& a);

// FNV-1a over the little-endian bytes of the values; stable across runs.
std::uint64_t content_hash(const Tensor& a);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace lbf
