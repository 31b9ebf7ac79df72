// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lbforecast/errors.hpp"
#include "lbforecast/policy.hpp"

namespace lbf {

double psnr(const Tensor& a, const Tensor& b, double data_range) {
  require_same_shape(a, b, "psnr");
  if (!(data_range > 0.0)) throw ParameterError("psnr data range must be > 0");
  double se = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_window() {
  std::vector<double> w(kWindow * kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    for (int j = 0; j < kWindow; ++j) {
      const double di = i - kWindow / 2;
      const double dj = j - kWindow / 2;
      const double v = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      w[static_cast<std::size_t>(i * kWindow + j)] = v;
      total += v;
    }
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double data_range) {
  require_same_shape(a, b, "ssim");
  if (a.rank() != 2) throw ShapeError("ssim expects H x W fields");
  const std::size_t h = a.shape()[0];
  const std::size_t w = a.shape()[1];
  if (h < kWindow || w < kWindow) throw ParameterError("ssim needs images of at least 11 x 11");
  if (!(data_range > 0.0)) throw ParameterError("ssim data range must be > 0");

  static const std::vector<double> win = gaussian_window();
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + kWindow <= h; ++r) {
    for (std::size_t c = 0; c + kWindow <= w; ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const double wt = win[static_cast<std::size_t>(i * kWindow + j)];
          const double va = a.at(r + i, c + j);
          const double vb = b.at(r + i, c + j);
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("pearson: series lengths differ");
  if (xs.size() < 2) throw DegenerateInputError("pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson: a series has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

QualityReport compare_quality(const Tensor& test, const Tensor& reference, std::size_t rows, std::size_t cols) {
  const Tensor a = test.reshaped({rows, cols});
  const Tensor b = reference.reshaped({rows, cols});
  const auto [lo, hi] = std::minmax_element(b.data().begin(), b.data().end());
  double range = *hi - *lo;
  if (!(range > 0.0)) range = 1.0;
  QualityReport q;
  q.psnr = psnr(a, b, range);
  q.ssim = ssim(a, b, range);
  q.rel_l2 = rel_error(a, b, NormKind::relative_l2);
  return q;
}

CorrelationResult error_correlation_study(const TapSeries& series, const CorrelationParams& params) {
  const std::size_t s = series.timesteps.size();
  if (series.first.size() != s || series.last.size() != s) {
    throw TraceError("tap series is missing first- or last-block outputs");
  }
  if (s < 2) throw TraceError("tap series needs at least two steps");
  const int warmup = params.warmup.value_or(params.order + 1);
  const auto anchors = plan_fixed(static_cast<int>(s), params.interval, warmup);

  double gap = 1.0;
  if (s >= 2) gap = static_cast<double>(series.timesteps[0] - series.timesteps[1]) * params.interval;
  TaylorCache first(params.order, params.mode, gap, GapRule::newest_pair);
  TaylorCache last(params.order, params.mode, gap, GapRule::newest_pair);

  CorrelationResult out;
  for (std::size_t i = 0; i < s; ++i) {
    const double t = static_cast<double>(series.timesteps[i]);
    if (anchors.count(static_cast<int>(i))) {
      first.update(t, series.first[i]);
      last.update(t, series.last[i]);
      continue;
    }
    ErrorPair p;
    p.step_index = static_cast<int>(i);
    p.timestep = series.timesteps[i];
    p.first_block_error = rel_error(first.predict(t), series.first[i], params.norm);
    p.last_block_error = rel_error(last.predict(t), series.last[i], params.norm);
    out.pairs.push_back(p);
  }

  std::vector<double> xs, ys;
  for (const auto& p : out.pairs) {
    xs.push_back(p.first_block_error);
    ys.push_back(p.last_block_error);
  }
  auto spread = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  // Errors at rounding level carry no signal; treat them as degenerate.
  if (spread(xs) <= kDegenerateSpread || spread(ys) <= kDegenerateSpread) return out;
  try {
    out.pearson_r = pearson(xs, ys);
    out.spearman_r = spearman(xs, ys);
  } catch (const DegenerateInputError&) {
    // Left empty: errors carry no variance (e.g. exactly predictable taps).
  }
  return out;
}

}  // namespace lbf
