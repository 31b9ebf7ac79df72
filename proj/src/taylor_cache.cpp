// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/taylor_cache.hpp"

#include <cmath>
#include <sstream>

#include "lbforecast/errors.hpp"

namespace lbf {

std::string_view to_string(ForecastMode mode) {
  return mode == ForecastMode::uniform_taylor ? "uniform-taylor" : "divided-difference";
}

std::string_view to_string(NormKind norm) {
  return norm == NormKind::relative_l2 ? "relative-L2" : "relative-L1";
}

std::optional<ForecastMode> parse_forecast_mode(std::string_view s) {
  if (s == "uniform-taylor") return ForecastMode::uniform_taylor;
  if (s == "divided-difference") return ForecastMode::divided_difference;
  return std::nullopt;
}

std::optional<NormKind> parse_norm_kind(std::string_view s) {
  if (s == "relative-L2") return NormKind::relative_l2;
  if (s == "relative-L1") return NormKind::relative_l1;
  return std::nullopt;
}

TaylorCache::TaylorCache(int order, ForecastMode mode, double nominal_gap, GapRule gap_rule)
    : order_(order), mode_(mode), nominal_gap_(nominal_gap), gap_rule_(gap_rule) {
  if (order < 0) throw ParameterError("forecast order must be >= 0, got " + std::to_string(order));
  if (mode == ForecastMode::uniform_taylor && !(nominal_gap > 0.0)) {
    throw ParameterError("uniform-taylor nominal gap must be > 0");
  }
}

std::optional<double> TaylorCache::newest_timestep() const {
  if (anchors_.empty()) return std::nullopt;
  return anchors_.back().timestep;
}

void TaylorCache::update(double t, const Tensor& feature) {
  if (!anchors_.empty()) {
    if (!(t < anchors_.back().timestep)) {
      std::ostringstream os;
      os << "anchor timestep " << t << " is not below newest anchor " << anchors_.back().timestep;
      throw OrderingError(os.str());
    }
    if (feature.shape() != anchors_.back().feature.shape()) {
      throw ShapeError("anchor shape " + shape_str(feature.shape()) + " differs from cached " +
                       shape_str(anchors_.back().feature.shape()));
    }
  }

  if (mode_ == ForecastMode::uniform_taylor) {
    std::vector<Tensor> next;
    next.reserve(capacity());
    next.push_back(feature);
    for (std::size_t i = 1; i <= static_cast<std::size_t>(order_) && i - 1 < diffs_.size(); ++i) {
      next.push_back(sub(next[i - 1], diffs_[i - 1]));
    }
    diffs_ = std::move(next);
  }

  anchors_.push_back({t, feature});
  while (anchors_.size() > capacity()) anchors_.pop_front();
}

int TaylorCache::effective_order() const noexcept {
  if (anchors_.empty()) return 0;
  if (mode_ == ForecastMode::uniform_taylor) return static_cast<int>(diffs_.size()) - 1;
  return static_cast<int>(anchors_.size()) - 1;
}

Tensor TaylorCache::predict(double t_target) const {
  if (anchors_.empty()) throw StateError("predict on an empty forecast cache");
  if (!(t_target < anchors_.back().timestep)) {
    std::ostringstream os;
    os << "target timestep " << t_target << " is not below newest anchor " << anchors_.back().timestep;
    throw OrderingError(os.str());
  }
  if (effective_order() == 0) return anchors_.back().feature;
  return mode_ == ForecastMode::uniform_taylor ? predict_uniform(t_target) : predict_newton(t_target);
}

double TaylorCache::step_unit() const {
  if (gap_rule_ == GapRule::newest_pair && anchors_.size() >= 2) {
    return anchors_[anchors_.size() - 2].timestep - anchors_.back().timestep;
  }
  return nominal_gap_;
}

Tensor TaylorCache::predict_uniform(double t_target) const {
  const double k = anchors_.back().timestep - t_target;
  const double ratio = k / step_unit();
  Tensor out = diffs_[0];
  double coeff = 1.0;
  for (std::size_t i = 1; i < diffs_.size(); ++i) {
    coeff *= ratio / static_cast<double>(i);
    axpy(coeff, diffs_[i], out);
  }
  return out;
}

Tensor TaylorCache::predict_newton(double t_target) const {
  // Divided-difference table ordered newest first, so the leading Newton
  // term is the newest anchor and the polynomial is centred where the
  // extrapolation starts.
  const std::size_t n = anchors_.size();
  std::vector<double> ts(n);
  std::vector<Tensor> coef(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = anchors_[n - 1 - i].timestep;
    coef[i] = anchors_[n - 1 - i].feature;
  }
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = n - 1; i >= level; --i) {
      const double denom = ts[i] - ts[i - level];
      Tensor diff = sub(coef[i], coef[i - 1]);
      coef[i] = scale(diff, 1.0 / denom);
    }
  }
  // Horner evaluation from the highest term down.
  Tensor out = coef[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    out = scale(out, t_target - ts[i]);
    axpy(1.0, coef[i], out);
  }
  return out;
}

std::size_t TaylorCache::slot_count() const noexcept {
  return anchors_.size() + (mode_ == ForecastMode::uniform_taylor ? diffs_.size() : 0);
}

void TaylorCache::clear() {
  anchors_.clear();
  diffs_.clear();
}

std::size_t slot_capacity(int order, ForecastMode mode) {
  const auto cap = static_cast<std::size_t>(order) + 1;
  return mode == ForecastMode::uniform_taylor ? 2 * cap : cap;
}

std::uint64_t prediction_flops(int order, std::size_t numel) {
  return 2ULL * static_cast<std::uint64_t>(order) * numel;
}

double rel_error(const Tensor& pred, const Tensor& truth, NormKind norm) {
  require_same_shape(pred, truth, "rel_error");
  const Tensor diff = sub(pred, truth);
  const double denom = norm == NormKind::relative_l2 ? norm_l2(truth) : norm_l1(truth);
  if (denom == 0.0) throw DegenerateInputError("relative error against a zero-norm reference");
  const double num = norm == NormKind::relative_l2 ? norm_l2(diff) : norm_l1(diff);
  return num / denom;
}

}  // namespace lbf
