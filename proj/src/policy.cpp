// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/policy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lbforecast/errors.hpp"

namespace lbf {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::full: return "full";
    case PolicyKind::reuse: return "reuse";
    case PolicyKind::taylorseer_module: return "taylorseer_module";
    case PolicyKind::lastblock: return "lastblock";
    case PolicyKind::pcg: return "pcg";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view s) {
  for (auto k : {PolicyKind::full, PolicyKind::reuse, PolicyKind::taylorseer_module, PolicyKind::lastblock,
                 PolicyKind::pcg}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::computed: return "computed";
    case Decision::predicted: return "predicted";
    case Decision::gated_accept: return "gated_accept";
    case Decision::gated_fallback: return "gated_fallback";
  }
  return "?";
}

Policy Policy::reuse(int n) {
  Policy p;
  p.kind = PolicyKind::reuse;
  p.interval = n;
  p.order = 0;
  return p;
}

Policy Policy::taylorseer_module(int n, int o) {
  Policy p;
  p.kind = PolicyKind::taylorseer_module;
  p.interval = n;
  p.order = o;
  return p;
}

Policy Policy::lastblock(int n, int o) {
  Policy p;
  p.kind = PolicyKind::lastblock;
  p.interval = n;
  p.order = o;
  return p;
}

Policy Policy::pcg(double eps, int o) {
  Policy p;
  p.kind = PolicyKind::pcg;
  p.epsilon = eps;
  p.order = o;
  return p;
}

ForecastMode Policy::effective_mode() const noexcept {
  if (mode) return *mode;
  return kind == PolicyKind::pcg ? ForecastMode::divided_difference : ForecastMode::uniform_taylor;
}

bool Policy::uses_fixed_schedule() const noexcept {
  return kind == PolicyKind::reuse || kind == PolicyKind::taylorseer_module || kind == PolicyKind::lastblock;
}

void Policy::validate() const {
  if (interval < 1) throw ConfigError("policy.N", "interval must be >= 1");
  if (order < 0) throw ConfigError("policy.O", "order must be >= 0");
  if (warmup && *warmup < 1) throw ConfigError("policy.warmup", "warmup must be >= 1");
  if (std::isnan(epsilon) || epsilon < 0.0) throw ConfigError("policy.epsilon", "threshold must be >= 0");
}

std::string Policy::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  if (uses_fixed_schedule()) os << "(N=" << interval << ",O=" << effective_order() << ")";
  if (kind == PolicyKind::pcg) os << "(eps=" << epsilon << ",O=" << order << ")";
  return os.str();
}

std::set<int> plan_fixed(int s, int n, int warmup) {
  if (s < 1 || n < 1 || warmup < 1) throw ParameterError("plan_fixed needs S >= 1, N >= 1, warmup >= 1");
  std::set<int> anchors;
  for (int i = 0; i < warmup && i < s; ++i) anchors.insert(i);
  for (int i = 0; i < s; i += n) anchors.insert(i);
  return anchors;
}

std::size_t RunReport::count(Decision d) const {
  std::size_t c = 0;
  for (const auto& s : decisions) c += s.decision == d ? 1 : 0;
  return c;
}

FullStep eval_step_full(const ToyDiTModel& model, const Tensor& x, double t, int class_id, bool record_branches) {
  auto out = model.forward_full(x, t, class_id, record_branches);
  return {std::move(out.eps_hat), std::move(out.taps), std::move(out.branches), flops_full_step(model.config())};
}

ForecastStep eval_step_module_taylor(const ToyDiTModel& model, const Tensor& x, double t, int class_id,
                                     std::span<const TaylorCache> caches) {
  const auto& cfg = model.config();
  const auto expected = static_cast<std::size_t>(cfg.num_blocks * cfg.modules_per_block());
  if (caches.size() != expected) {
    throw StateError("module forecast needs " + std::to_string(expected) + " caches, got " +
                     std::to_string(caches.size()));
  }
  Embedding e = model.embed(x, t, class_id);
  Tensor tokens = std::move(e.tokens);
  std::uint64_t flops = flops_embed(cfg) + flops_head(cfg);
  for (const TaylorCache& c : caches) {
    axpy(1.0, c.predict(t), tokens);
    flops += prediction_flops(c.order(), tokens.numel());
  }
  Tensor eps = model.head(tokens, e.cond);
  return {std::move(eps), std::move(tokens), flops};
}

ForecastStep eval_step_lastblock(const ToyDiTModel& model, double t, int class_id, const TaylorCache& cache_last) {
  const auto& cfg = model.config();
  Tensor tap = cache_last.predict(t);
  // The head still needs the conditioning vector; the token embedding is skipped.
  Tensor eps = model.head(tap, model.condition(t, class_id));
  const std::uint64_t flops = flops_cond(cfg) + flops_head(cfg) + prediction_flops(cache_last.order(), tap.numel());
  return {std::move(eps), std::move(tap), flops};
}

GateOutcome gate_decide(const Tensor& first_true, const Tensor& first_pred, double epsilon, NormKind norm,
                        double* error_out) {
  double err = 0.0;
  try {
    err = rel_error(first_pred, first_true, norm);
  } catch (const DegenerateInputError&) {
    if (error_out) *error_out = std::numeric_limits<double>::infinity();
    return GateOutcome::fallback;
  }
  if (error_out) *error_out = err;
  return err < epsilon ? GateOutcome::accept : GateOutcome::fallback;
}

PcgStep eval_step_pcg(const ToyDiTModel& model, const Tensor& x, double t, int class_id, TaylorCache& cache_first,
                      TaylorCache& cache_last, double epsilon, NormKind norm) {
  if (cache_first.empty() || cache_last.empty()) throw StateError("gated step before warmup filled the caches");
  const auto& cfg = model.config();
  Embedding e = model.embed(x, t, class_id);
  Tensor first_true = model.block_forward(1, e.tokens, e.cond);
  const Tensor first_pred = cache_first.predict(t);
  const std::uint64_t pred_cost = prediction_flops(cache_first.order(), first_true.numel());

  PcgStep out;
  double err = 0.0;
  const GateOutcome gate = gate_decide(first_true, first_pred, epsilon, norm, &err);
  out.decision.first_block_rel_error = err;

  if (gate == GateOutcome::accept) {
    const Tensor last_pred = cache_last.predict(t);
    out.eps_hat = model.head(last_pred, e.cond);
    out.decision.decision = Decision::gated_accept;
    out.decision.blocks_computed = 1;
    out.decision.flops_spent = flops_embed(cfg) + flops_block(cfg) + flops_head(cfg) + pred_cost +
                               prediction_flops(cache_last.order(), last_pred.numel());
    return out;
  }

  // Same operations, same order as forward_full, so the fallback result is
  // bit-identical to a full step.
  Tensor tokens = first_true;
  for (int b = 2; b <= cfg.num_blocks; ++b) tokens = model.block_forward(b, tokens, e.cond);
  out.eps_hat = model.head(tokens, e.cond);
  cache_first.update(t, first_true);
  cache_last.update(t, tokens);
  out.decision.decision = Decision::gated_fallback;
  out.decision.blocks_computed = cfg.num_blocks;
  out.decision.flops_spent = flops_full_step(cfg) + pred_cost;
  return out;
}

namespace {

class Runner {
 public:
  Runner(const ToyDiTModel& model, const NoiseSchedule& schedule, const Policy& policy, int class_id)
      : model_(model), cfg_(model.config()), policy_(policy), class_id_(class_id) {
    const int s = schedule.num_sample_steps();
    const double stride = static_cast<double>(schedule.total_steps / s);
    const int order = policy.effective_order();
    const ForecastMode mode = policy.effective_mode();
    // Uniform expansions measure their step unit from the two newest anchors.
    // On a regular schedule that is N; it differs only where the warmup
    // prefix or gating makes anchor gaps irregular.
    switch (policy.kind) {
      case PolicyKind::full:
        break;
      case PolicyKind::reuse:
      case PolicyKind::taylorseer_module: {
        const auto count = static_cast<std::size_t>(cfg_.num_blocks * cfg_.modules_per_block());
        caches_.assign(count, TaylorCache(order, mode, policy.interval * stride, GapRule::newest_pair));
        break;
      }
      case PolicyKind::lastblock:
        caches_.assign(1, TaylorCache(order, mode, policy.interval * stride, GapRule::newest_pair));
        break;
      case PolicyKind::pcg:
        caches_.assign(2, TaylorCache(order, mode, stride, GapRule::newest_pair));
        break;
    }
    if (policy.uses_fixed_schedule()) anchors_ = plan_fixed(s, policy.interval, policy.effective_warmup());
  }

  Tensor step(int i, int timestep, const Tensor& x, StepDecision& rec, Tensor* last_tap) {
    const double t = static_cast<double>(timestep);
    rec.step_index = i;
    rec.timestep = timestep;

    const bool warm = i < policy_.effective_warmup();
    const bool full_now = policy_.kind == PolicyKind::full || (policy_.uses_fixed_schedule() && anchors_.count(i)) ||
                          (policy_.kind == PolicyKind::pcg && warm);
    if (full_now) {
      const bool module_level =
          policy_.kind == PolicyKind::reuse || policy_.kind == PolicyKind::taylorseer_module;
      FullStep fs = eval_step_full(model_, x, t, class_id_, module_level);
      if (module_level) {
        std::size_t idx = 0;
        for (const auto& block : fs.branches) {
          for (const auto& br : block.branches) caches_[idx++].update(t, br);
        }
      } else if (policy_.kind == PolicyKind::lastblock) {
        caches_[0].update(t, fs.taps.back());
      } else if (policy_.kind == PolicyKind::pcg) {
        caches_[0].update(t, fs.taps.front());
        caches_[1].update(t, fs.taps.back());
      }
      rec.decision = Decision::computed;
      rec.flops_spent = fs.flops;
      rec.blocks_computed = cfg_.num_blocks;
      if (last_tap) *last_tap = fs.taps.back();
      track_slots();
      return std::move(fs.eps_hat);
    }

    if (policy_.kind == PolicyKind::pcg) {
      PcgStep ps = eval_step_pcg(model_, x, t, class_id_, caches_[0], caches_[1], policy_.epsilon, policy_.norm);
      ps.decision.step_index = i;
      ps.decision.timestep = timestep;
      rec = ps.decision;
      track_slots();
      return std::move(ps.eps_hat);
    }

    ForecastStep fs = policy_.kind == PolicyKind::lastblock
                          ? eval_step_lastblock(model_, t, class_id_, caches_[0])
                          : eval_step_module_taylor(model_, x, t, class_id_, caches_);
    rec.decision = Decision::predicted;
    rec.flops_spent = fs.flops;
    rec.blocks_computed = 0;
    if (last_tap) *last_tap = fs.last_tap;
    track_slots();
    return std::move(fs.eps_hat);
  }

  std::size_t peak_slots() const noexcept { return peak_slots_; }

 private:
  void track_slots() {
    std::size_t total = 0;
    for (const auto& c : caches_) total += c.slot_count();
    peak_slots_ = std::max(peak_slots_, total);
  }

  const ToyDiTModel& model_;
  const ToyDiTConfig& cfg_;
  Policy policy_;
  int class_id_;
  std::vector<TaylorCache> caches_;
  std::set<int> anchors_;
  std::size_t peak_slots_ = 0;
};

}  // namespace

RunResult run_policy(const ToyDiTModel& model, const NoiseSchedule& schedule, const Policy& policy,
                     const Tensor& x_T, int class_id, const RunOptions& options) {
  policy.validate();
  const int s = schedule.num_sample_steps();
  if (policy.kind != PolicyKind::full && policy.effective_warmup() > s) {
    throw ConfigError("policy.warmup", "warmup of " + std::to_string(policy.effective_warmup()) +
                                           " steps exceeds the " + std::to_string(s) + " sampling steps");
  }

  Runner runner(model, schedule, policy, class_id);
  RunResult result;
  RunReport& rep = result.report;
  rep.policy = policy.describe();
  rep.num_blocks = model.config().num_blocks;
  rep.num_steps = s;

  rep.final_latent = run_sampling(schedule, x_T, [&](int i, int timestep, const Tensor& x) {
    StepDecision rec;
    Tensor eps = runner.step(i, timestep, x, rec, nullptr);
    if (options.record_steps) {
      // Ground truth at this latent, outside the FLOP ledger.
      auto truth = model.forward_full(x, static_cast<double>(timestep), class_id);
      result.steps.push_back({timestep, truth.taps.front(), truth.taps.back(), eps});
    }
    result.eps_history.push_back(eps);
    rep.decisions.push_back(rec);
    return eps;
  });

  std::uint64_t blocks = 0;
  for (const auto& d : rep.decisions) {
    rep.total_flops += d.flops_spent;
    blocks += static_cast<std::uint64_t>(d.blocks_computed);
  }
  rep.baseline_flops = static_cast<std::uint64_t>(s) * flops_full_step(model.config());
  rep.speedup_flops = static_cast<double>(rep.baseline_flops) / static_cast<double>(rep.total_flops);
  rep.skip_fraction = 1.0 - static_cast<double>(blocks) / (static_cast<double>(s) * rep.num_blocks);
  const std::size_t gated = rep.count(Decision::gated_accept) + rep.count(Decision::gated_fallback);
  rep.fallback_rate = gated == 0 ? 0.0 : static_cast<double>(rep.count(Decision::gated_fallback)) / gated;
  rep.peak_cache_slots = runner.peak_slots();
  return result;
}

std::uint64_t expected_total_flops(const ToyDiTConfig& cfg, const Policy& policy, std::size_t computed,
                                   std::size_t predicted, std::size_t accepts, std::size_t fallbacks) {
  const std::uint64_t full = flops_full_step(cfg);
  const std::uint64_t pred = prediction_flops(policy.effective_order(),
                                              static_cast<std::size_t>(cfg.num_tokens * cfg.model_dim));
  const auto branches = static_cast<std::uint64_t>(cfg.num_blocks * cfg.modules_per_block());
  std::uint64_t total = computed * full;
  switch (policy.kind) {
    case PolicyKind::full:
      break;
    case PolicyKind::reuse:
    case PolicyKind::taylorseer_module:
      total += predicted * (flops_embed(cfg) + flops_head(cfg) + branches * pred);
      break;
    case PolicyKind::lastblock:
      total += predicted * (flops_cond(cfg) + flops_head(cfg) + pred);
      break;
    case PolicyKind::pcg:
      total += fallbacks * (full + pred);
      total += accepts * (flops_embed(cfg) + flops_block(cfg) + flops_head(cfg) + 2 * pred);
      break;
  }
  return total;
}

std::size_t expected_peak_slots(const ToyDiTConfig& cfg, const Policy& policy) {
  const std::size_t cap = slot_capacity(policy.effective_order(), policy.effective_mode());
  switch (policy.kind) {
    case PolicyKind::full: return 0;
    case PolicyKind::reuse:
    case PolicyKind::taylorseer_module:
      return static_cast<std::size_t>(cfg.modules_per_block() * cfg.num_blocks) * cap;
    case PolicyKind::lastblock: return cap;
    case PolicyKind::pcg: return 2 * cap;
  }
  return 0;
}

}  // namespace lbf
