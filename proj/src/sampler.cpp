// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/sampler.hpp"

#include <cmath>

#include "lbforecast/errors.hpp"

namespace lbf {

namespace {

void check_abar(double abar, const char* what) {
  if (abar == 0.0) throw SingularityError(std::string(what) + " is zero");
  if (!(abar > 0.0 && abar <= 1.0)) throw ParameterError(std::string(what) + " must lie in (0, 1]");
}

}  // namespace

double NoiseSchedule::abar_prev(int i) const {
  const auto next = static_cast<std::size_t>(i) + 1;
  if (next >= sample_steps.size()) return 1.0;
  return abar_at(sample_steps[next]);
}

NoiseSchedule make_schedule(int total_steps, int sample_steps, double beta_start, double beta_end) {
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ParameterError("need 0 < beta_start <= beta_end < 1");
  }
  if (total_steps < 1) throw ParameterError("total steps must be >= 1");
  if (sample_steps < 1 || sample_steps > total_steps) throw ParameterError("need 1 <= sample steps <= total steps");

  NoiseSchedule s;
  s.total_steps = total_steps;
  s.alphas_bar.resize(static_cast<std::size_t>(total_steps));
  double prod = 1.0;
  for (int t = 0; t < total_steps; ++t) {
    const double beta = total_steps == 1
                            ? beta_start
                            : beta_start + (beta_end - beta_start) * t / static_cast<double>(total_steps - 1);
    prod *= 1.0 - beta;
    s.alphas_bar[static_cast<std::size_t>(t)] = prod;
  }
  const int stride = total_steps / sample_steps;
  for (int i = 0; i < sample_steps; ++i) s.sample_steps.push_back(total_steps - 1 - i * stride);
  return s;
}

Tensor add_noise(const Tensor& x0, const Tensor& eps, double abar_t) {
  require_same_shape(x0, eps, "add_noise");
  if (!(abar_t >= 0.0 && abar_t <= 1.0)) throw ParameterError("alpha-bar must lie in [0, 1]");
  Tensor out = scale(x0, std::sqrt(abar_t));
  axpy(std::sqrt(1.0 - abar_t), eps, out);
  return out;
}

Tensor estimate_x0(const Tensor& x_t, const Tensor& eps_hat, double abar_t) {
  require_same_shape(x_t, eps_hat, "estimate_x0");
  check_abar(abar_t, "alpha-bar");
  Tensor out = x_t;
  axpy(-std::sqrt(1.0 - abar_t), eps_hat, out);
  return scale(out, 1.0 / std::sqrt(abar_t));
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, double abar_t, double abar_prev) {
  check_abar(abar_prev, "previous alpha-bar");
  if (abar_prev == abar_t) return x_t;
  Tensor out = estimate_x0(x_t, eps_hat, abar_t);
  if (abar_prev == 1.0) return out;
  out = scale(out, std::sqrt(abar_prev));
  axpy(std::sqrt(1.0 - abar_prev), eps_hat, out);
  return out;
}

Tensor run_sampling(const NoiseSchedule& schedule, const Tensor& x_T, const EpsFn& eps_fn) {
  if (!all_finite(x_T)) throw ParameterError("initial latent is not finite");
  Tensor x = x_T;
  for (int i = 0; i < schedule.num_sample_steps(); ++i) {
    const int t = schedule.sample_steps[static_cast<std::size_t>(i)];
    const Tensor eps_hat = eps_fn(i, t, x);
    x = ddim_step(x, eps_hat, schedule.abar_at(t), schedule.abar_prev(i));
  }
  return x;
}

}  // namespace lbf
