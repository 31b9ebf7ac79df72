// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lbforecast/taylor_cache.hpp"
#include "lbforecast/tensor.hpp"

namespace lbf {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(L^2 / MSE); identical inputs return kPsnrCap.
double psnr(const Tensor& a, const Tensor& b, double data_range);

// Mean local SSIM over every fully contained 11x11 Gaussian window
// (sigma 1.5), C1 = (0.01 L)^2, C2 = (0.03 L)^2. Inputs are H x W.
double ssim(const Tensor& a, const Tensor& b, double data_range);

// Sample Pearson correlation. Throws DegenerateInputError on zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);
// Pearson on average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct QualityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double rel_l2 = 0.0;
};

// Compares `test` against `reference`, both reshaped to `rows` x `cols`. The
// data range is the reference's max - min (1 when the reference is flat).
QualityReport compare_quality(const Tensor& test, const Tensor& reference, std::size_t rows, std::size_t cols);

struct ErrorPair {
  int step_index = 0;
  int timestep = 0;
  double first_block_error = 0.0;
  double last_block_error = 0.0;
};

struct TapSeries {
  std::vector<int> timesteps;
  std::vector<Tensor> first;
  std::vector<Tensor> last;
};

struct CorrelationParams {
  int interval = 4;  // N
  int order = 1;     // O
  std::optional<int> warmup;  // defaults to order + 1
  ForecastMode mode = ForecastMode::uniform_taylor;
  NormKind norm = NormKind::relative_l2;
};

// Error series whose max - min is at or below this are reported as degenerate.
inline constexpr double kDegenerateSpread = 1e-9;

struct CorrelationResult {
  std::vector<ErrorPair> pairs;
  std::optional<double> pearson_r;  // empty when the errors have no variance
  std::optional<double> spearman_r;
};

// Replays a fixed anchor schedule over recorded taps and collects, at every
// non-anchor step, the relative forecast error of the first and of the last
// block against the recorded truth.
CorrelationResult error_correlation_study(const TapSeries& series, const CorrelationParams& params);

}  // namespace lbf
