// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Per-timestep acceleration policies and their FLOP / cache-slot accounting.
//
//   full               every step runs all blocks
//   reuse(N)           module-level caching with order 0 (frozen branches)
//   taylorseer_module  every residual branch of every block is forecast
//   lastblock          only the last block's output is forecast
//   pcg                the first block always runs; its forecast error gates
//                      whether the last-block forecast is trusted or the step
//                      falls back to full computation

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lbforecast/sampler.hpp"
#include "lbforecast/taylor_cache.hpp"
#include "lbforecast/tensor.hpp"
#include "lbforecast/toy_dit.hpp"

namespace lbf {

enum class PolicyKind { full, reuse, taylorseer_module, lastblock, pcg };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view s);

struct Policy {
  PolicyKind kind = PolicyKind::full;
  int interval = 2;  // N: anchor spacing of fixed schedules, in sampling steps
  int order = 1;     // O
  std::optional<int> warmup;  // defaults to order + 1
  double epsilon = 0.03;      // may be +infinity
  std::optional<ForecastMode> mode;  // defaults: uniform-taylor, divided-difference for pcg
  NormKind norm = NormKind::relative_l2;

  static Policy full() { return {}; }
  static Policy reuse(int n);
  static Policy taylorseer_module(int n, int o);
  static Policy lastblock(int n, int o);
  static Policy pcg(double eps, int o);

  int effective_order() const noexcept { return kind == PolicyKind::reuse ? 0 : order; }
  int effective_warmup() const noexcept { return warmup.value_or(effective_order() + 1); }
  ForecastMode effective_mode() const noexcept;
  bool uses_fixed_schedule() const noexcept;

  void validate() const;
  std::string describe() const;
};

// Anchor step indices of a fixed schedule: the warmup prefix plus every
// multiple of n below s.
std::set<int> plan_fixed(int s, int n, int warmup);

enum class Decision { computed, predicted, gated_accept, gated_fallback };
std::string_view to_string(Decision d);

struct StepDecision {
  int step_index = 0;
  int timestep = 0;
  Decision decision = Decision::computed;
  std::optional<double> first_block_rel_error;
  std::uint64_t flops_spent = 0;
  int blocks_computed = 0;
};

struct RunReport {
  std::string policy;
  int num_blocks = 0;
  int num_steps = 0;
  std::vector<StepDecision> decisions;
  std::uint64_t total_flops = 0;
  std::uint64_t baseline_flops = 0;
  double speedup_flops = 1.0;
  double skip_fraction = 0.0;
  double fallback_rate = 0.0;
  std::size_t peak_cache_slots = 0;
  Tensor final_latent;

  std::size_t count(Decision d) const;
};

// Ground-truth taps at the latent each step saw, plus the noise estimate the
// policy actually used. Captured for offline analysis.
struct StepRecord {
  int timestep = 0;
  Tensor first_tap;
  Tensor last_tap;
  Tensor eps_hat;
};

struct RunOptions {
  bool record_steps = false;
};

struct RunResult {
  RunReport report;
  std::vector<StepRecord> steps;  // empty unless RunOptions::record_steps
  std::vector<Tensor> eps_history;
};

struct FullStep {
  Tensor eps_hat;
  std::vector<Tensor> taps;
  std::vector<BlockBranches> branches;
  std::uint64_t flops = 0;
};

struct ForecastStep {
  Tensor eps_hat;
  Tensor last_tap;
  std::uint64_t flops = 0;
};

struct PcgStep {
  Tensor eps_hat;
  StepDecision decision;
};

FullStep eval_step_full(const ToyDiTModel& model, const Tensor& x, double t, int class_id,
                        bool record_branches = false);

// `caches` holds one cache per residual branch, block-major in module order.
ForecastStep eval_step_module_taylor(const ToyDiTModel& model, const Tensor& x, double t, int class_id,
                                     std::span<const TaylorCache> caches);

ForecastStep eval_step_lastblock(const ToyDiTModel& model, double t, int class_id, const TaylorCache& cache_last);

enum class GateOutcome { accept, fallback };

// Accepts iff rel_error(first_pred, first_true) < epsilon; a zero-norm
// truth falls back.
GateOutcome gate_decide(const Tensor& first_true, const Tensor& first_pred, double epsilon, NormKind norm,
                        double* error_out = nullptr);

// One gated step. Both caches are updated only on fallback.
PcgStep eval_step_pcg(const ToyDiTModel& model, const Tensor& x, double t, int class_id, TaylorCache& cache_first,
                      TaylorCache& cache_last, double epsilon, NormKind norm);

RunResult run_policy(const ToyDiTModel& model, const NoiseSchedule& schedule, const Policy& policy,
                     const Tensor& x_T, int class_id, const RunOptions& options = {});

// Closed-form total for a decision sequence; used to cross-check the ledger.
std::uint64_t expected_total_flops(const ToyDiTConfig& cfg, const Policy& policy, std::size_t computed,
                                   std::size_t predicted, std::size_t accepts, std::size_t fallbacks);

// Peak cache slots a policy needs once its caches are full.
std::size_t expected_peak_slots(const ToyDiTConfig& cfg, const Policy& policy);

}  // namespace lbf
