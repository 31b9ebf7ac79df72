// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Forecast cache for one feature target. Features recorded at fully computed
// timesteps are kept as anchors, and future values are extrapolated either
// with a truncated Taylor series over finite differences on a nominal grid
// (uniform-taylor) or with the Newton polynomial through the anchors at
// their true timesteps (divided-difference).
//
// Sign convention: differences are taken in sampling order, newest minus
// previous, and the expansion uses positive powers of k / N where
// k = t_anchor - t_target. A feature linear in t is therefore reproduced
// exactly.

#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lbforecast/tensor.hpp"

namespace lbf {

enum class ForecastMode { uniform_taylor, divided_difference };
enum class NormKind { relative_l2, relative_l1 };

// How the uniform-taylor expansion picks its step unit N.
enum class GapRule {
  nominal,      // the fixed gap passed at construction
  newest_pair,  // distance between the two newest anchors (irregular schedules)
};

std::string_view to_string(ForecastMode mode);
std::string_view to_string(NormKind norm);
std::optional<ForecastMode> parse_forecast_mode(std::string_view s);
std::optional<NormKind> parse_norm_kind(std::string_view s);

struct Anchor {
  double timestep;
  Tensor feature;
};

class TaylorCache {
 public:
  TaylorCache(int order, ForecastMode mode, double nominal_gap = 1.0, GapRule gap_rule = GapRule::nominal);

  int order() const noexcept { return order_; }
  ForecastMode mode() const noexcept { return mode_; }
  double nominal_gap() const noexcept { return nominal_gap_; }
  std::size_t capacity() const noexcept { return static_cast<std::size_t>(order_) + 1; }

  const std::deque<Anchor>& anchors() const noexcept { return anchors_; }
  // D_0 .. D_filled in uniform-taylor mode, empty otherwise.
  const std::vector<Tensor>& diffs() const noexcept { return diffs_; }
  bool empty() const noexcept { return anchors_.empty(); }
  std::optional<double> newest_timestep() const;

  // Appends `feature` as the newest anchor at timestep `t`; `t` must be
  // strictly below the newest anchor.
  void update(double t, const Tensor& feature);

  // Extrapolates to `t_target` (< newest anchor). Uses the highest order the
  // stored anchors support, capped at order().
  Tensor predict(double t_target) const;

  // Highest expansion order predict() would use right now.
  int effective_order() const noexcept;

  // Feature slots held: anchors, plus finite differences in uniform-taylor mode.
  std::size_t slot_count() const noexcept;

  void clear();

 private:
  Tensor predict_uniform(double t_target) const;
  Tensor predict_newton(double t_target) const;
  double step_unit() const;

  int order_;
  ForecastMode mode_;
  double nominal_gap_;
  GapRule gap_rule_;
  std::deque<Anchor> anchors_;
  std::vector<Tensor> diffs_;
};

// Slots a cache of this order and mode holds once full.
std::size_t slot_capacity(int order, ForecastMode mode);

// Arithmetic cost of one predict(): one multiply-add per element per order.
std::uint64_t prediction_flops(int order, std::size_t numel);

// ||pred - truth|| / ||truth||. Throws DegenerateInputError when ||truth|| == 0.
double rel_error(const Tensor& pred, const Tensor& truth, NormKind norm = NormKind::relative_l2);

}  // namespace lbf
