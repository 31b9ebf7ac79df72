// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration: a JSON tree with the sections below. Every key is
// optional; unknown keys are rejected with their dotted path.
//
//   model     B=8 d=64 h=4 n=16 mlp_ratio=4 cross_attention=false m=16
//             num_classes=10 seed=0 init_std=0.02 gate_scale=16
//   schedule  T=1000 S=50 beta_start=1e-4 beta_end=0.02
//   policy    kind="full" N=2 O=1 warmup=O+1 epsilon=0.03 mode=(per kind)
//             norm="relative-L2"          epsilon also accepts "inf"
//   seed      42   (seed of the initial latent x_T)
//   class_id  0
//   output    out="" record_trace=""
//   sweep     policy=[..] epsilon=[..] N=[..] O=[..] mode=[..]
//   analysis  N=4 O=1 warmup=O+1 mode="uniform-taylor" norm="relative-L2"
//   threads   0    (bench workers; 0 = hardware concurrency)

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lbforecast/metrics.hpp"
#include "lbforecast/policy.hpp"
#include "lbforecast/toy_dit.hpp"

namespace lbf {

struct ScheduleConfig {
  int total_steps = 1000;
  int sample_steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct SweepConfig {
  std::vector<PolicyKind> policies;
  std::vector<double> epsilons;
  std::vector<int> intervals;
  std::vector<int> orders;
  std::vector<ForecastMode> modes;
};

struct ExperimentConfig {
  ToyDiTConfig model;
  ScheduleConfig schedule;
  Policy policy;
  std::uint64_t seed = 42;
  int class_id = 0;
  std::string out;
  std::string record_trace;
  std::optional<SweepConfig> sweep;
  CorrelationParams analysis;
  int threads = 0;
};

// Throws ConfigError with the offending key path.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON text with every default made explicit.
std::string config_to_json(const ExperimentConfig& cfg);
std::string model_config_hash(const ToyDiTConfig& cfg);

std::string format_epsilon(double eps);

}  // namespace lbf
