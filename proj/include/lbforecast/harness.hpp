// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// The run / bench / trace-eval commands behind the lbf-bench CLI. Each
// returns its products in memory and writes files only when a path is set.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lbforecast/config.hpp"
#include "lbforecast/metrics.hpp"
#include "lbforecast/policy.hpp"
#include "lbforecast/trace.hpp"

namespace lbf {

inline constexpr const char* kBenchCsvHeader =
    "policy,epsilon,N,O,mode,total_flops,baseline_flops,flops_speedup,skip_fraction,fallback_rate,"
    "psnr_vs_full,ssim_vs_full,rel_l2_vs_full,peak_cache_slots";

// x_T ~ N(0, 1) of shape [n x d] from the config seed.
Tensor initial_latent(const ExperimentConfig& cfg);

std::string report_to_json(const RunReport& report, const ExperimentConfig& cfg);

struct RunOutput {
  RunResult run;
  std::string report_json;
  std::optional<Trace> trace;
};

// Writes the report to cfg.out and the trace to cfg.record_trace when set.
RunOutput cmd_run(const ExperimentConfig& cfg);

// Grid points of cfg.sweep in row order. Throws ConfigError on an empty grid.
std::vector<Policy> expand_grid(const ExperimentConfig& cfg);

struct BenchRow {
  Policy policy;
  RunReport report;
  QualityReport quality;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::string csv;
};

// Runs every grid point plus one full-policy reference; writes CSV to cfg.out when set.
BenchResult cmd_bench(const ExperimentConfig& cfg);

struct TraceEvalResult {
  CorrelationResult study;
  std::string csv;
};

TraceEvalResult evaluate_trace(const Trace& trace, const CorrelationParams& params);
TraceEvalResult cmd_trace_eval(const std::string& trace_path, const CorrelationParams& params,
                               const std::string& out_path = "");

}  // namespace lbf
