// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lbforecast/errors.hpp"
#include "lbforecast/harness.hpp"

using namespace lbf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s && out.pass) {
    out.pass = false;
    char buf[96];
    std::snprintf(buf, sizeof buf, "took %.2fs, budget %.0fs", secs, budget_s);
    out.detail = buf;
  }
  if (!out.pass) ++failures;
  std::printf("[%s] %2d %-28s %6.2fs  %s\n", out.pass ? "PASS" : "FAIL", id, name, secs, out.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor latent(const ToyDiTConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian(rng, {static_cast<std::size_t>(c.num_tokens), static_cast<std::size_t>(c.model_dim)}, 1.0);
}

// Closed-form matmul FLOPs, written out independently of the library.
struct Ledger {
  std::uint64_t embed, cond, block, head, full, numel;

  explicit Ledger(const ToyDiTConfig& c) {
    const std::uint64_t n = c.num_tokens, d = c.model_dim, r = c.mlp_ratio, m = c.context_tokens;
    block = 2 * n * d * 3 * d + 4 * n * n * d + 2 * n * d * d + 2 * n * d * r * d * 2;
    if (c.cross_attention) block += 2 * n * d * d + 2 * m * d * 2 * d + 4 * n * m * d + 2 * n * d * d;
    cond = 2 * d * d * 2;
    embed = 2 * n * d * d + cond;
    head = 2 * n * d * d;
    full = embed + static_cast<std::uint64_t>(c.num_blocks) * block + head;
    numel = n * d;
  }

  std::uint64_t predict(int order) const { return 2 * static_cast<std::uint64_t>(order) * numel; }

  std::uint64_t total(const ToyDiTConfig& c, const Policy& p, const RunReport& r) const {
    const std::uint64_t computed = r.count(Decision::computed), predicted = r.count(Decision::predicted);
    const std::uint64_t accepts = r.count(Decision::gated_accept), fallbacks = r.count(Decision::gated_fallback);
    const int o = p.effective_order();
    const std::uint64_t caches = static_cast<std::uint64_t>(c.num_blocks * c.modules_per_block());
    switch (p.kind) {
      case PolicyKind::full:
        return computed * full;
      case PolicyKind::reuse:
      case PolicyKind::taylorseer_module:
        return computed * full + predicted * (embed + head + caches * predict(o));
      case PolicyKind::lastblock:
        return computed * full + predicted * (cond + head + predict(o));
      case PolicyKind::pcg:
        return computed * full + accepts * (embed + block + head + 2 * predict(o)) +
               fallbacks * (full + predict(o));
    }
    return 0;
  }
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Outcome reuse_equivalence() {
  Outcome o;
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mode = trial % 2 ? ForecastMode::uniform_taylor : ForecastMode::divided_difference;
    TaylorCache cache(0, mode, 1.0 + 9.0 * rng.next_unit());
    const Shape shape = {1 + rng.next_u64() % 5, 1 + rng.next_u64() % 7};
    const int updates = 1 + static_cast<int>(rng.next_u64() % 6);
    double t = 1000.0;
    Tensor newest;
    for (int k = 0; k < updates; ++k) {
      t -= 1.0 + 50.0 * rng.next_unit();
      newest = gaussian(rng, shape, 3.0);
      cache.update(t, newest);
    }
    const double target = t - 1e-3 - 100.0 * rng.next_unit();
    o.require(cache.predict(target) == newest, "trial " + std::to_string(trial) + " differs from newest anchor");
  }
  if (o.pass) o.detail = "100 caches, exact equality";
  return o;
}

Outcome polynomial_exactness() {
  Outcome o;
  Rng rng(202);
  double worst = 0.0;
  for (int order = 1; order <= 3; ++order) {
    for (int trial = 0; trial < 30; ++trial) {
      const int degree = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(order + 1));
      const std::size_t width = 6;
      std::vector<std::vector<double>> coef(width, std::vector<double>(static_cast<std::size_t>(degree) + 1));
      for (auto& c : coef) {
        for (auto& a : c) a = rng.next_normal();
      }
      auto truth = [&](double t) {
        const double u = (t - 500.0) / 100.0;
        std::vector<double> v(width);
        for (std::size_t e = 0; e < width; ++e) {
          double p = 0.0, pw = 1.0;
          for (double a : coef[e]) {
            p += a * pw;
            pw *= u;
          }
          v[e] = p;
        }
        return Tensor({width}, std::move(v));
      };
      TaylorCache cache(order, ForecastMode::divided_difference);
      double t = 900.0 - 50.0 * rng.next_unit();
      for (int k = 0; k <= order; ++k) {
        cache.update(t, truth(t));
        t -= 3.0 + 60.0 * rng.next_unit();
      }
      const double newest = *cache.newest_timestep();
      for (int q = 0; q < 10; ++q) {
        const double target = newest - 0.5 - 150.0 * rng.next_unit();
        const Tensor want = truth(target);
        const double nrm = norm_l2(want);
        if (nrm < 1e-6) continue;
        const double err = norm_l2(sub(cache.predict(target), want)) / nrm;
        worst = std::max(worst, err);
      }
    }
  }
  o.require(worst <= 1e-9, "worst relative error " + fmt("%.3e", worst));
  o.detail = "worst relative error " + fmt("%.3e", worst) + " (tol 1e-9)";
  return o;
}

Outcome mode_separation() {
  Outcome o;
  auto scalar = [](double v) { return Tensor({1}, std::vector<double>{v}); };
  TaylorCache uni(2, ForecastMode::uniform_taylor, 2.0);
  TaylorCache newton(2, ForecastMode::divided_difference);
  for (double t : {12.0, 10.0, 8.0}) {
    uni.update(t, scalar(t * t));
    newton.update(t, scalar(t * t));
  }
  const double u = uni.predict(7.0)[0], n = newton.predict(7.0)[0];
  o.require(std::abs(u - 47.0) <= 1e-12, "uniform-taylor gave " + fmt("%.15g", u));
  o.require(std::abs(n - 49.0) <= 1e-12, "divided-difference gave " + fmt("%.15g", n));
  if (o.pass) o.detail = "uniform-taylor " + fmt("%.15g", u) + ", divided-difference " + fmt("%.15g", n);
  return o;
}

Outcome gate_boundaries() {
  Outcome o;
  const ToyDiTConfig cfg;
  const ToyDiTModel model(cfg);
  const NoiseSchedule sched = make_schedule(1000, 50);
  const Tensor x = latent(cfg, 42);

  const RunResult full = run_policy(model, sched, Policy::full(), x, 0);
  const RunResult zero = run_policy(model, sched, Policy::pcg(0.0, 1), x, 0);
  o.require(zero.eps_history.size() == full.eps_history.size(), "step count mismatch");
  for (std::size_t i = 0; i < full.eps_history.size() && o.pass; ++i) {
    o.require(zero.eps_history[i] == full.eps_history[i], "eps_hat differs at step " + std::to_string(i));
  }
  o.require(zero.report.final_latent == full.report.final_latent, "final latent differs at eps=0");

  // Reference: warmup full steps, then last-block forecasts forever.
  const Policy inf_policy = Policy::pcg(kInf, 1);
  const RunResult gated = run_policy(model, sched, inf_policy, x, 0);
  const int warmup = inf_policy.effective_warmup();
  TaylorCache cache(inf_policy.order, inf_policy.effective_mode());
  Tensor xt = x;
  for (int i = 0; i < sched.num_sample_steps() && o.pass; ++i) {
    const int t = sched.sample_steps[static_cast<std::size_t>(i)];
    Tensor eps;
    Decision want;
    if (i < warmup) {
      const auto fs = eval_step_full(model, xt, t, 0);
      cache.update(t, fs.taps.back());
      eps = fs.eps_hat;
      want = Decision::computed;
    } else {
      eps = model.head(cache.predict(t), model.condition(t, 0));
      want = Decision::gated_accept;
    }
    const auto& d = gated.report.decisions[static_cast<std::size_t>(i)];
    o.require(d.decision == want, "decision differs at step " + std::to_string(i));
    o.require(gated.eps_history[static_cast<std::size_t>(i)] == eps, "eps_hat differs at step " + std::to_string(i));
    xt = ddim_step(xt, eps, sched.abar_at(t), sched.abar_prev(i));
  }
  o.require(gated.report.final_latent == xt, "final latent differs from the reference at eps=inf");
  if (o.pass) {
    o.detail = "eps=0 bit-identical over 50 steps; eps=inf matches warmup-then-predict, skip " +
               fmt("%.4f", gated.report.skip_fraction);
  }
  return o;
}

Outcome flop_ledger() {
  Outcome o;
  const ToyDiTConfig cfg;
  const ToyDiTModel model(cfg);
  const NoiseSchedule sched = make_schedule(1000, 50);
  const Tensor x = latent(cfg, 42);
  const Ledger ledger(cfg);
  const std::vector<Policy> policies = {Policy::full(),
                                        Policy::reuse(2),
                                        Policy::reuse(5),
                                        Policy::taylorseer_module(2, 1),
                                        Policy::taylorseer_module(4, 2),
                                        Policy::lastblock(2, 1),
                                        Policy::lastblock(3, 2),
                                        Policy::pcg(0.0, 1),
                                        Policy::pcg(0.03, 1),
                                        Policy::pcg(0.13, 2),
                                        Policy::pcg(kInf, 1)};
  for (const Policy& p : policies) {
    const RunReport r = run_policy(model, sched, p, x, 0).report;
    const std::uint64_t want = ledger.total(cfg, p, r);
    o.require(r.total_flops == want, p.describe() + ": " + std::to_string(r.total_flops) + " != " +
                                         std::to_string(want));
    std::uint64_t sum = 0;
    for (const auto& d : r.decisions) sum += d.flops_spent;
    o.require(sum == r.total_flops, p.describe() + ": per-step sum differs");
    if (p.kind == PolicyKind::full) {
      o.require(r.total_flops == 50 * (ledger.embed + 8 * ledger.block + ledger.head), "full-policy total");
    }
  }
  if (o.pass) o.detail = std::to_string(policies.size()) + " policies integer-exact";
  return o;
}

Outcome slot_ledger() {
  Outcome o;
  const NoiseSchedule sched = make_schedule(1000, 20);
  std::string summary;
  for (auto [blocks, order] : {std::pair{4, 1}, std::pair{8, 2}}) {
    ToyDiTConfig cfg;
    cfg.num_blocks = blocks;
    cfg.cross_attention = true;
    cfg.model_dim = 16;
    cfg.num_heads = 2;
    cfg.num_tokens = 4;
    cfg.context_tokens = 4;
    const ToyDiTModel model(cfg);
    const Tensor x = latent(cfg, 1);
    const Policy module = Policy::taylorseer_module(2, order);
    const Policy last = Policy::lastblock(2, order);
    const Policy gate = Policy::pcg(0.05, order);
    const auto cap = [&](const Policy& p) { return slot_capacity(p.order, p.effective_mode()); };
    const std::size_t s_module = run_policy(model, sched, module, x, 0).report.peak_cache_slots;
    const std::size_t s_last = run_policy(model, sched, last, x, 0).report.peak_cache_slots;
    const std::size_t s_gate = run_policy(model, sched, gate, x, 0).report.peak_cache_slots;
    const std::string tag = "(B=" + std::to_string(blocks) + ",O=" + std::to_string(order) + ")";
    o.require(s_module == 3 * static_cast<std::size_t>(blocks) * cap(module), tag + " module-level slots");
    o.require(s_last == cap(last), tag + " last-block slots");
    o.require(s_gate == 2 * cap(gate), tag + " gated slots");
    summary += tag + " " + std::to_string(s_module) + "/" + std::to_string(s_last) + "/" +
               std::to_string(s_gate) + (blocks == 4 ? ", " : "");
  }
  if (o.pass) o.detail = "module/lastblock/pcg peak slots " + summary;
  return o;
}

Outcome correlation_study() {
  Outcome o;
  const ToyDiTConfig cfg;
  const ToyDiTModel model(cfg);
  RunOptions opts;
  opts.record_steps = true;
  const RunResult run = run_policy(model, make_schedule(1000, 50), Policy::full(), latent(cfg, 42), 0, opts);
  CorrelationParams params;
  params.interval = 4;
  params.order = 1;
  const CorrelationResult r = error_correlation_study(trace_from_run(run, "").taps(), params);
  o.require(r.pearson_r.has_value(), "correlation degenerate");
  if (!o.pass) return o;
  o.require(*r.pearson_r > 0.0, "r not positive");
  o.require(*r.pearson_r > 0.3, "r = " + fmt("%.4f", *r.pearson_r));
  o.detail = "pearson r = " + fmt("%.4f", *r.pearson_r) + " over " + std::to_string(r.pairs.size()) +
             " steps (threshold 0.3)";
  return o;
}

Outcome tradeoff_endpoints() {
  Outcome o;
  const ExperimentConfig cfg = parse_config(
      R"({"policy":{"kind":"pcg"},"sweep":{"epsilon":[0,0.13,0.30,0.50,0.80,"inf"]}})");
  const BenchResult bench = cmd_bench(cfg);
  const auto rows = split_lines(bench.csv);
  o.require(rows.size() == 7, "expected 6 data rows");
  if (!o.pass) return o;
  const auto header = split_csv(rows[0]);
  auto col = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(std::string("missing column ") + name);
  };
  const std::size_t c_eps = col("epsilon"), c_skip = col("skip_fraction"), c_rel = col("rel_l2_vs_full");
  std::vector<double> skip;
  std::vector<double> rel;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split_csv(rows[i]);
    skip.push_back(std::stod(cells[c_skip]));
    rel.push_back(std::stod(cells[c_rel]));
    if (i == 1) {
      o.require(cells[c_eps] == "0", "first row is not eps=0");
      o.require(cells[c_rel] == "0", "rel_l2 at eps=0 is " + cells[c_rel]);
    }
    if (i == rows.size() - 1) o.require(cells[c_eps] == "inf", "last row is not eps=inf");
  }
  o.require(skip.front() == 0.0, "skip_fraction at eps=0 is " + fmt("%.6g", skip.front()));
  for (double s : skip) o.require(s <= skip.back(), "skip_fraction at eps=inf is not maximal");
  bool monotone = true;
  for (std::size_t i = 1; i < skip.size(); ++i) monotone = monotone && skip[i] >= skip[i - 1];
  if (o.pass) {
    o.detail = "skip 0 -> " + fmt("%.4f", skip.back()) + ", rel_l2@0 = 0, intermediate skip monotone: " +
               (monotone ? "yes" : "no");
  }
  return o;
}

Outcome sampler_identities() {
  Outcome o;
  Rng rng(909);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Tensor x0 = gaussian(rng, {4, 8}, 1.0 + rng.next_unit());
    const Tensor eps = gaussian(rng, {4, 8}, 1.0);
    const double abar = 0.005 + 0.99 * rng.next_unit();
    const Tensor back = estimate_x0(add_noise(x0, eps, abar), eps, abar);
    worst = std::max(worst, norm_l2(sub(back, x0)) / norm_l2(x0));

    const Tensor xt = gaussian(rng, {4, 8}, 1.0);
    o.require(ddim_step(xt, eps, abar, abar) == xt, "fixed point");
    o.require(ddim_step(xt, eps, abar, 1.0) == estimate_x0(xt, eps, abar), "terminal step");
  }
  o.require(worst <= 1e-12, "round trip error " + fmt("%.3e", worst));
  if (o.pass) o.detail = "round trip worst " + fmt("%.3e", worst) + "; fixed point and terminal exact";
  return o;
}

Outcome metric_sanity() {
  Outcome o;
  Rng rng(4);
  const Tensor a = gaussian(rng, {16, 64}, 1.0);
  const double s_self = ssim(a, a, 8.0);
  o.require(std::abs(s_self - 1.0) <= 1e-12, "ssim(x,x) = " + fmt("%.17g", s_self));
  const double s_const = ssim(Tensor({16, 16}, 0.0), Tensor({16, 16}, 0.5), 1.0);
  o.require(std::abs(s_const - 1e-4 / 0.2501) <= 1e-12, "constant-field ssim = " + fmt("%.17g", s_const));
  const double p = psnr(Tensor({8, 8}, 0.0), Tensor({8, 8}, 0.1), 1.0);
  o.require(std::abs(p - 20.0) <= 1e-9, "psnr = " + fmt("%.17g", p));
  const std::vector<double> xs = {0.3, 1.2, -0.7, 4.0, 2.2};
  const double r = pearson(xs, xs);
  o.require(std::abs(r - 1.0) <= 1e-12, "pearson(xs,xs) = " + fmt("%.17g", r));
  if (o.pass) o.detail = "ssim self/const, psnr 20 dB, pearson self all within tolerance";
  return o;
}

Outcome determinism() {
  Outcome o;
  ExperimentConfig cfg = parse_config(
      R"({"policy":{"kind":"pcg","epsilon":0.13},
          "sweep":{"policy":["full","reuse","lastblock","taylorseer_module","pcg"],"epsilon":[0.13,0.5],"N":[2,4]}})");
  const RunOutput a = cmd_run(cfg);
  const RunOutput b = cmd_run(cfg);
  o.require(a.report_json == b.report_json, "run JSON differs between identical runs");

  cfg.threads = 1;
  const std::string serial = cmd_bench(cfg).csv;
  cfg.threads = 4;
  const std::string parallel = cmd_bench(cfg).csv;
  o.require(serial == parallel, "bench CSV differs between runs");

  RunOptions opts;
  opts.record_steps = true;
  const ToyDiTModel model(cfg.model);
  const RunResult run = run_policy(model, make_schedule(1000, 50), cfg.policy, initial_latent(cfg), 0, opts);
  const Trace mem = trace_from_run(run, model_config_hash(cfg.model));
  std::stringstream bytes;
  write_trace(mem, bytes);
  const Trace disk = read_trace(bytes);
  const TraceEvalResult e_mem = evaluate_trace(mem, cfg.analysis);
  const TraceEvalResult e_disk = evaluate_trace(disk, cfg.analysis);
  o.require(e_mem.csv == e_disk.csv, "trace evaluation differs after write/read");
  if (o.pass) {
    o.detail = "run JSON and " + std::to_string(split_lines(serial).size() - 1) +
               "-row bench CSV byte-identical; trace round trip eval identical";
  }
  return o;
}

}  // namespace

int main() {
  criterion(1, "reuse equivalence", 1.0, reuse_equivalence);
  criterion(2, "polynomial exactness", 1.0, polynomial_exactness);
  criterion(3, "mode separation", 0.0, mode_separation);
  criterion(4, "gate boundary equivalences", 5.0, gate_boundaries);
  criterion(5, "flop ledger", 0.0, flop_ledger);
  criterion(6, "slot ledger", 0.0, slot_ledger);
  criterion(7, "correlation study", 10.0, correlation_study);
  criterion(8, "trade-off endpoints", 0.0, tradeoff_endpoints);
  criterion(9, "sampler identities", 0.0, sampler_identities);
  criterion(10, "metric sanity", 0.0, metric_sanity);
  criterion(11, "determinism and persistence", 0.0, determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
