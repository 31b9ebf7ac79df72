// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Trace files hold per-step block outputs for offline analysis.
//
// Layout (all integers and floats little-endian):
//   bytes 0..3    magic "TFTR"
//   u32           format version (1)
//   u32           header length L in bytes
//   L bytes       UTF-8 JSON header
//   payload       f64 values; for each step in sampling order the fields
//                 listed in header "fields" ("tap_1", "tap_B", "eps_hat"),
//                 each a row-major tensor of header "tap_shape"
//
// Header keys: version, model_hash, policy, steps, blocks, tap_blocks,
// tap_shape, fields, timesteps, payload_values.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lbforecast/metrics.hpp"
#include "lbforecast/policy.hpp"
#include "lbforecast/tensor.hpp"

namespace lbf {

inline constexpr std::uint32_t kTraceVersion = 1;

struct Trace {
  std::string model_hash;
  std::string policy;
  int blocks = 0;
  Shape tap_shape;
  std::vector<int> timesteps;
  std::vector<Tensor> first;  // block 1 output per step
  std::vector<Tensor> last;   // block B output per step
  std::vector<Tensor> eps;    // noise estimate used per step

  int steps() const noexcept { return static_cast<int>(timesteps.size()); }
  TapSeries taps() const { return {timesteps, first, last}; }
};

// Requires a run made with RunOptions::record_steps.
Trace trace_from_run(const RunResult& run, const std::string& model_hash);

void write_trace(const Trace& trace, std::ostream& out);
void write_trace_file(const Trace& trace, const std::string& path);

// Throws TraceError on bad magic, unsupported version, malformed header, or a
// payload whose length differs from what the header declares.
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::string& path);

}  // namespace lbf
