// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Linear-beta noise schedule and the deterministic (eta = 0) DDIM update.

#pragma once

#include <functional>
#include <vector>

#include "lbforecast/tensor.hpp"

namespace lbf {

struct NoiseSchedule {
  int total_steps = 1000;
  std::vector<double> alphas_bar;  // alphas_bar[t] for t = 0 .. T-1
  std::vector<int> sample_steps;   // strictly decreasing timesteps

  int num_sample_steps() const noexcept { return static_cast<int>(sample_steps.size()); }
  double abar_at(int t) const { return alphas_bar.at(static_cast<std::size_t>(t)); }
  // alpha-bar of the timestep that follows step `i` in sampling order; 1 after the last step.
  double abar_prev(int i) const;
};

// alphas_bar[t] = prod_{s <= t} (1 - beta_s), beta linear from beta_start to
// beta_end. Sample steps are T-1 - i*floor(T/S) for i = 0 .. S-1.
NoiseSchedule make_schedule(int total_steps = 1000, int sample_steps = 50, double beta_start = 1e-4,
                            double beta_end = 0.02);

Tensor add_noise(const Tensor& x0, const Tensor& eps, double abar_t);
Tensor estimate_x0(const Tensor& x_t, const Tensor& eps_hat, double abar_t);
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, double abar_t, double abar_prev);

// Called once per sampling step with (step index, timestep, current latent);
// returns the noise estimate for that step.
using EpsFn = std::function<Tensor(int step_index, int timestep, const Tensor& x_t)>;

// Runs the reverse loop over schedule.sample_steps starting from x_T.
Tensor run_sampling(const NoiseSchedule& schedule, const Tensor& x_T, const EpsFn& eps_fn);

}  // namespace lbf
