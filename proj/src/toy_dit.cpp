// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/toy_dit.hpp"

#include <cmath>

#include "lbforecast/errors.hpp"

namespace lbf {

void ToyDiTConfig::validate() const {
  auto fail = [](const char* key, const std::string& msg) { throw ConfigError(key, msg); };
  if (num_blocks < 2) fail("B", "need at least 2 blocks");
  if (model_dim < 4) fail("d", "model width must be >= 4");
  if (num_heads < 1) fail("h", "need at least one head");
  if (model_dim % num_heads != 0) {
    fail("d", "model width " + std::to_string(model_dim) + " is not divisible by " +
                  std::to_string(num_heads) + " heads");
  }
  if (num_tokens < 1) fail("n", "need at least one token");
  if (mlp_ratio < 1) fail("mlp_ratio", "must be a positive integer");
  if (cross_attention && context_tokens < 1) fail("m", "need at least one context token");
  if (num_classes < 1) fail("num_classes", "need at least one class");
  if (!(init_std >= 0.0) || !std::isfinite(init_std)) fail("init_std", "must be finite and >= 0");
  if (!(gate_scale >= 0.0) || !std::isfinite(gate_scale)) fail("gate_scale", "must be finite and >= 0");
}

Tensor timestep_features(double t, int dim) {
  Tensor out({static_cast<std::size_t>(dim)});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[static_cast<std::size_t>(i)] = std::cos(t * freq);
    out[static_cast<std::size_t>(half + i)] = std::sin(t * freq);
  }
  return out;
}

// Draw order: input projection, timestep MLP (two layers), class table,
// then per block and per module: modulation, then the module's weights in
// member order; then the cross-attention context, final modulation, head.
ToyDiTModel::ToyDiTModel(ToyDiTConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto d = static_cast<std::size_t>(cfg_.model_dim);
  const auto hidden = d * static_cast<std::size_t>(cfg_.mlp_ratio);
  const double s = cfg_.init_std;
  Rng rng(cfg_.seed);

  // Input projection and head start from the identity so the untrained
  // network behaves like a bounded noise predictor.
  w_in_ = add(Tensor::identity(d), gaussian(rng, {d, d}, s));
  w_t1_ = gaussian(rng, {d, d}, s);
  w_t2_ = gaussian(rng, {d, d}, s);
  class_emb_ = gaussian(rng, {static_cast<std::size_t>(cfg_.num_classes), d}, s);

  blocks_.resize(static_cast<std::size_t>(cfg_.num_blocks));
  for (auto& block : blocks_) {
    for (ModuleKind kind : module_kinds()) {
      Module m{kind, gaussian(rng, {d, 3 * d}, s), {}, {}, {}};
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 2 * d; c < 3 * d; ++c) m.mod.at(r, c) *= cfg_.gate_scale;
      }
      switch (kind) {
        case ModuleKind::self_attention:
          m.w_a = gaussian(rng, {d, 3 * d}, s);
          m.w_b = gaussian(rng, {d, d}, s);
          break;
        case ModuleKind::cross_attention:
          m.w_a = gaussian(rng, {d, d}, s);
          m.w_b = gaussian(rng, {d, 2 * d}, s);
          m.w_c = gaussian(rng, {d, d}, s);
          break;
        case ModuleKind::feed_forward:
          m.w_a = gaussian(rng, {d, hidden}, s);
          m.w_b = gaussian(rng, {hidden, d}, s);
          break;
      }
      block.modules.push_back(std::move(m));
    }
  }

  const auto m = static_cast<std::size_t>(cfg_.cross_attention ? cfg_.context_tokens : 1);
  context_ = gaussian(rng, {m, d}, 1.0);
  final_mod_ = gaussian(rng, {d, 2 * d}, s);
  w_out_ = add(Tensor::identity(d), gaussian(rng, {d, d}, s));
}

std::vector<ModuleKind> ToyDiTModel::module_kinds() const {
  if (cfg_.cross_attention) {
    return {ModuleKind::self_attention, ModuleKind::cross_attention, ModuleKind::feed_forward};
  }
  return {ModuleKind::self_attention, ModuleKind::feed_forward};
}

Embedding ToyDiTModel::embed(const Tensor& x, double t, int class_id) const {
  const auto n = static_cast<std::size_t>(cfg_.num_tokens);
  const auto d = static_cast<std::size_t>(cfg_.model_dim);
  if (x.shape() != Shape{n, d}) {
    throw ShapeError("latent shape " + shape_str(x.shape()) + " does not match " + shape_str({n, d}));
  }
  Tensor cond = condition(t, class_id);
  return {matmul(x, w_in_), std::move(cond)};
}

Tensor ToyDiTModel::condition(double t, int class_id) const {
  if (class_id < 0 || class_id >= cfg_.num_classes) {
    throw ParameterError("class id " + std::to_string(class_id) + " out of range");
  }
  // The raw sinusoid stays in the conditioning vector alongside its
  // projection so the timestep signal is not swamped by small weights.
  const Tensor feats = timestep_features(t, cfg_.model_dim);
  Tensor cond = add(feats, vecmat(silu(vecmat(feats, w_t1_)), w_t2_));
  const auto row = static_cast<std::size_t>(class_id);
  for (std::size_t j = 0; j < cond.numel(); ++j) cond[j] += class_emb_.at(row, j);
  return cond;
}

Tensor ToyDiTModel::attention(const Tensor& q, const Tensor& k, const Tensor& v) const {
  const std::size_t nq = q.rows();
  const std::size_t nk = k.rows();
  const std::size_t d = q.cols();
  const auto heads = static_cast<std::size_t>(cfg_.num_heads);
  const std::size_t hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  Tensor out({nq, d});
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor scores({nq, nk});
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t j = 0; j < nk; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < hd; ++c) acc += q.at(i, h * hd + c) * k.at(j, h * hd + c);
        scores.at(i, j) = acc * inv_sqrt;
      }
    }
    const Tensor probs = softmax_rows(scores);
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t j = 0; j < nk; ++j) {
        const double p = probs.at(i, j);
        for (std::size_t c = 0; c < hd; ++c) out.at(i, h * hd + c) += p * v.at(j, h * hd + c);
      }
    }
  }
  return out;
}

Tensor ToyDiTModel::run_module(const Module& m, const Tensor& normed) const {
  const auto d = static_cast<std::size_t>(cfg_.model_dim);
  switch (m.kind) {
    case ModuleKind::self_attention: {
      const Tensor qkv = matmul(normed, m.w_a);
      const Tensor ctx = attention(slice_cols(qkv, 0, d), slice_cols(qkv, d, d), slice_cols(qkv, 2 * d, d));
      return matmul(ctx, m.w_b);
    }
    case ModuleKind::cross_attention: {
      const Tensor q = matmul(normed, m.w_a);
      const Tensor kv = matmul(context_, m.w_b);
      const Tensor ctx = attention(q, slice_cols(kv, 0, d), slice_cols(kv, d, d));
      return matmul(ctx, m.w_c);
    }
    case ModuleKind::feed_forward:
      return matmul(gelu(matmul(normed, m.w_a)), m.w_b);
  }
  throw StateError("unknown module kind");
}

void ToyDiTModel::check_block(int b) const {
  if (b < 1 || b > cfg_.num_blocks) {
    throw ParameterError("block index " + std::to_string(b) + " outside 1.." + std::to_string(cfg_.num_blocks));
  }
}

Tensor ToyDiTModel::block_forward(int b, const Tensor& tokens, const Tensor& cond, BlockBranches* branches) const {
  check_block(b);
  const auto d = static_cast<std::size_t>(cfg_.model_dim);
  const Tensor act = silu(cond);
  Tensor x = tokens;
  for (const Module& m : blocks_[static_cast<std::size_t>(b - 1)].modules) {
    const Tensor mod = vecmat(act, m.mod);
    const Tensor h = modulate(layernorm(x), slice_cols(mod, 0, d), slice_cols(mod, d, d));
    Tensor branch = mul_rows(run_module(m, h), slice_cols(mod, 2 * d, d));
    axpy(1.0, branch, x);
    if (branches) branches->branches.push_back(std::move(branch));
  }
  return x;
}

Tensor ToyDiTModel::head(const Tensor& last_tap, const Tensor& cond) const {
  const auto d = static_cast<std::size_t>(cfg_.model_dim);
  const Tensor mod = vecmat(silu(cond), final_mod_);
  const Tensor h = modulate(layernorm(last_tap), slice_cols(mod, 0, d), slice_cols(mod, d, d));
  return matmul(h, w_out_);
}

ToyDiTModel::Output ToyDiTModel::forward_full(const Tensor& x, double t, int class_id, bool record_branches) const {
  Embedding e = embed(x, t, class_id);
  Output out;
  out.taps.reserve(static_cast<std::size_t>(cfg_.num_blocks));
  Tensor tokens = std::move(e.tokens);
  for (int b = 1; b <= cfg_.num_blocks; ++b) {
    BlockBranches* rec = nullptr;
    if (record_branches) rec = &out.branches.emplace_back();
    tokens = block_forward(b, tokens, e.cond, rec);
    out.taps.push_back(tokens);
  }
  out.eps_hat = head(out.taps.back(), e.cond);
  return out;
}

void ToyDiTModel::perturb_block(int b, double amount, std::uint64_t seed) {
  check_block(b);
  Rng rng(seed);
  for (Module& m : blocks_[static_cast<std::size_t>(b - 1)].modules) {
    for (Tensor* w : {&m.mod, &m.w_a, &m.w_b}) {
      for (auto& v : w->data()) v += amount * rng.next_normal();
    }
  }
}

std::uint64_t flops_block(const ToyDiTConfig& cfg) {
  const auto n = static_cast<std::uint64_t>(cfg.num_tokens);
  const auto d = static_cast<std::uint64_t>(cfg.model_dim);
  const auto r = static_cast<std::uint64_t>(cfg.mlp_ratio);
  std::uint64_t f = (8 + 4 * r) * n * d * d + 4 * n * n * d;
  if (cfg.cross_attention) {
    const auto m = static_cast<std::uint64_t>(cfg.context_tokens);
    f += 2 * n * d * d + 4 * m * d * d + 4 * n * m * d + 2 * n * d * d;
  }
  return f;
}

std::uint64_t flops_embed(const ToyDiTConfig& cfg) {
  const auto n = static_cast<std::uint64_t>(cfg.num_tokens);
  const auto d = static_cast<std::uint64_t>(cfg.model_dim);
  return 2 * n * d * d + flops_cond(cfg);
}

std::uint64_t flops_cond(const ToyDiTConfig& cfg) {
  const auto d = static_cast<std::uint64_t>(cfg.model_dim);
  return 4 * d * d;
}

std::uint64_t flops_head(const ToyDiTConfig& cfg) {
  const auto n = static_cast<std::uint64_t>(cfg.num_tokens);
  const auto d = static_cast<std::uint64_t>(cfg.model_dim);
  return 2 * n * d * d;
}

std::uint64_t flops_full_step(const ToyDiTConfig& cfg) {
  return flops_embed(cfg) + static_cast<std::uint64_t>(cfg.num_blocks) * flops_block(cfg) + flops_head(cfg);
}

}  // namespace lbf
