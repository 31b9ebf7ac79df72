// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lbforecast/errors.hpp"

namespace lbf {

using json = nlohmann::json;

namespace {

std::string fmt_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

NoiseSchedule schedule_of(const ExperimentConfig& cfg) {
  return make_schedule(cfg.schedule.total_steps, cfg.schedule.sample_steps, cfg.schedule.beta_start,
                       cfg.schedule.beta_end);
}

}  // namespace

Tensor initial_latent(const ExperimentConfig& cfg) {
  Rng rng(cfg.seed);
  return gaussian(rng,
                  {static_cast<std::size_t>(cfg.model.num_tokens), static_cast<std::size_t>(cfg.model.model_dim)},
                  1.0);
}

std::string report_to_json(const RunReport& r, const ExperimentConfig& cfg) {
  json j;
  j["policy"] = r.policy;
  j["model_hash"] = model_config_hash(cfg.model);
  j["seed"] = cfg.seed;
  j["steps"] = r.num_steps;
  j["blocks"] = r.num_blocks;
  j["total_flops"] = r.total_flops;
  j["baseline_flops"] = r.baseline_flops;
  j["speedup_flops"] = r.speedup_flops;
  j["skip_fraction"] = r.skip_fraction;
  j["fallback_rate"] = r.fallback_rate;
  j["peak_cache_slots"] = r.peak_cache_slots;
  j["counts"] = {{"computed", r.count(Decision::computed)},
                 {"predicted", r.count(Decision::predicted)},
                 {"gated_accept", r.count(Decision::gated_accept)},
                 {"gated_fallback", r.count(Decision::gated_fallback)}};
  j["final_latent_hash"] = hex64(content_hash(r.final_latent));
  j["final_latent_l2"] = norm_l2(r.final_latent);
  json steps = json::array();
  for (const auto& d : r.decisions) {
    json s = {{"step", d.step_index},
              {"timestep", d.timestep},
              {"decision", std::string(to_string(d.decision))},
              {"flops", d.flops_spent},
              {"blocks", d.blocks_computed}};
    if (d.first_block_rel_error) {
      s["first_block_rel_error"] = std::isfinite(*d.first_block_rel_error) ? json(*d.first_block_rel_error)
                                                                           : json("inf");
    }
    steps.push_back(std::move(s));
  }
  j["decisions"] = std::move(steps);
  return j.dump(2) + "\n";
}

RunOutput cmd_run(const ExperimentConfig& cfg) {
  const ToyDiTModel model(cfg.model);
  const NoiseSchedule schedule = schedule_of(cfg);
  RunOptions opts;
  opts.record_steps = !cfg.record_trace.empty();
  RunOutput out;
  out.run = run_policy(model, schedule, cfg.policy, initial_latent(cfg), cfg.class_id, opts);
  out.report_json = report_to_json(out.run.report, cfg);
  if (opts.record_steps) {
    out.trace = trace_from_run(out.run, model_config_hash(cfg.model));
    write_trace_file(*out.trace, cfg.record_trace);
  }
  if (!cfg.out.empty()) write_text(cfg.out, out.report_json);
  return out;
}

std::vector<Policy> expand_grid(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep", "bench needs a sweep section");
  const SweepConfig& s = *cfg.sweep;
  const Policy& base = cfg.policy;
  auto or_base = [](const auto& list, auto fallback) {
    using T = typename std::decay_t<decltype(list)>::value_type;
    return list.empty() ? std::vector<T>{static_cast<T>(fallback)} : list;
  };
  // Absent axes fall back to the base policy value.
  const auto kinds = s.policies.empty() ? std::vector<PolicyKind>{base.kind} : s.policies;
  const auto epsilons = or_base(s.epsilons, base.epsilon);
  const auto intervals = or_base(s.intervals, base.interval);
  const auto orders = or_base(s.orders, base.order);

  std::vector<Policy> grid;
  for (PolicyKind kind : kinds) {
    Policy p = base;
    p.kind = kind;
    p.mode.reset();
    std::vector<std::optional<ForecastMode>> modes;
    if (s.modes.empty()) {
      modes.push_back(base.mode);
    } else {
      for (auto m : s.modes) modes.emplace_back(m);
    }
    switch (kind) {
      case PolicyKind::full:
        grid.push_back(Policy::full());
        break;
      case PolicyKind::reuse:
        for (int n : intervals) {
          for (auto m : modes) {
            Policy q = p;
            q.interval = n;
            q.order = 0;
            q.mode = m;
            grid.push_back(q);
          }
        }
        break;
      case PolicyKind::taylorseer_module:
      case PolicyKind::lastblock:
        for (int n : intervals) {
          for (int o : orders) {
            for (auto m : modes) {
              Policy q = p;
              q.interval = n;
              q.order = o;
              q.mode = m;
              grid.push_back(q);
            }
          }
        }
        break;
      case PolicyKind::pcg:
        for (double e : epsilons) {
          for (int o : orders) {
            for (auto m : modes) {
              Policy q = p;
              q.epsilon = e;
              q.order = o;
              q.mode = m;
              grid.push_back(q);
            }
          }
        }
        break;
    }
  }
  if (grid.empty()) throw ConfigError("sweep", "sweep grid is empty");
  for (const auto& p : grid) {
    p.validate();
    if (p.kind != PolicyKind::full && p.effective_warmup() > cfg.schedule.sample_steps) {
      throw ConfigError("sweep.O", "warmup of a grid point exceeds the number of sampling steps");
    }
  }
  return grid;
}

namespace {

std::string csv_row(const BenchRow& row) {
  const Policy& p = row.policy;
  const RunReport& r = row.report;
  const bool pcg = p.kind == PolicyKind::pcg;
  const bool fixed = p.uses_fixed_schedule();
  const bool cached = p.kind != PolicyKind::full;
  std::ostringstream os;
  os << to_string(p.kind) << ',' << (pcg ? format_epsilon(p.epsilon) : "") << ','
     << (fixed ? std::to_string(p.interval) : "") << ',' << (cached ? std::to_string(p.effective_order()) : "")
     << ',' << (cached ? std::string(to_string(p.effective_mode())) : "") << ',' << r.total_flops << ','
     << r.baseline_flops << ',' << fmt_real(r.speedup_flops) << ',' << fmt_real(r.skip_fraction) << ','
     << fmt_real(r.fallback_rate) << ',' << fmt_real(row.quality.psnr) << ',' << fmt_real(row.quality.ssim) << ','
     << fmt_real(row.quality.rel_l2) << ',' << r.peak_cache_slots;
  return os.str();
}

}  // namespace

BenchResult cmd_bench(const ExperimentConfig& cfg) {
  const std::vector<Policy> grid = expand_grid(cfg);
  if (cfg.model.num_tokens < 11 || cfg.model.model_dim < 11) {
    throw ConfigError("model.n", "bench compares latents with an 11x11 SSIM window; needs n >= 11 and d >= 11");
  }
  const ToyDiTModel model(cfg.model);
  const NoiseSchedule schedule = schedule_of(cfg);
  const Tensor x_T = initial_latent(cfg);
  const RunResult reference = run_policy(model, schedule, Policy::full(), x_T, cfg.class_id);
  const auto rows = static_cast<std::size_t>(cfg.model.num_tokens);
  const auto cols = static_cast<std::size_t>(cfg.model.model_dim);

  BenchResult result;
  result.rows.resize(grid.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        RunResult run = run_policy(model, schedule, grid[i], x_T, cfg.class_id);
        BenchRow& row = result.rows[i];
        row.policy = grid[i];
        row.quality = compare_quality(run.report.final_latent, reference.report.final_latent, rows, cols);
        row.report = std::move(run.report);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, grid.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream csv;
  csv << kBenchCsvHeader << '\n';
  for (const auto& row : result.rows) csv << csv_row(row) << '\n';
  result.csv = csv.str();
  if (!cfg.out.empty()) write_text(cfg.out, result.csv);
  return result;
}

TraceEvalResult evaluate_trace(const Trace& trace, const CorrelationParams& params) {
  TraceEvalResult out;
  out.study = error_correlation_study(trace.taps(), params);
  std::ostringstream csv;
  csv << "step_index,timestep,first_block_error,last_block_error\n";
  for (const auto& p : out.study.pairs) {
    csv << p.step_index << ',' << p.timestep << ',' << fmt_real(p.first_block_error) << ','
        << fmt_real(p.last_block_error) << '\n';
  }
  csv << "# pearson_r=" << (out.study.pearson_r ? fmt_real(*out.study.pearson_r) : "degenerate") << '\n';
  csv << "# spearman_r=" << (out.study.spearman_r ? fmt_real(*out.study.spearman_r) : "degenerate") << '\n';
  out.csv = csv.str();
  return out;
}

TraceEvalResult cmd_trace_eval(const std::string& trace_path, const CorrelationParams& params,
                               const std::string& out_path) {
  const Trace trace = read_trace_file(trace_path);
  TraceEvalResult out = evaluate_trace(trace, params);
  if (!out_path.empty()) write_text(out_path, out.csv);
  return out;
}

}  // namespace lbf
