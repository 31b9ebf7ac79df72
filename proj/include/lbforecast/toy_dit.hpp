// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

// A small, seeded diffusion transformer. Each block is a stack of pre-norm
// residual modules (self-attention, optional cross-attention, MLP) whose
// branches are modulated and gated by an adaLN projection of the
// conditioning vector. Weights are random; nothing here is trained.

#pragma once

#include <cstdint>
#include <vector>

#include "lbforecast/tensor.hpp"

namespace lbf {

struct ToyDiTConfig {
  int num_blocks = 8;
  int model_dim = 64;
  int num_heads = 4;
  int num_tokens = 16;
  int mlp_ratio = 4;
  bool cross_attention = false;
  int context_tokens = 16;
  int num_classes = 10;
  std::uint64_t seed = 0;
  double init_std = 0.02;
  // Multiplies the adaLN gate projections. 0 gives exact adaLN-Zero
  // (every block is the identity); larger values make feature trajectories
  // rougher and harder to forecast.
  double gate_scale = 16.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  int modules_per_block() const noexcept { return cross_attention ? 3 : 2; }
  int head_dim() const noexcept { return model_dim / num_heads; }
};

enum class ModuleKind { self_attention, cross_attention, feed_forward };

// Residual-branch outputs of one block, in execution order.
struct BlockBranches {
  std::vector<Tensor> branches;
};

struct Embedding {
  Tensor tokens;  // [n x d]
  Tensor cond;    // [d]
};

class ToyDiTModel {
 public:
  explicit ToyDiTModel(ToyDiTConfig cfg);

  const ToyDiTConfig& config() const noexcept { return cfg_; }
  std::vector<ModuleKind> module_kinds() const;

  Embedding embed(const Tensor& x, double t, int class_id) const;
  // Conditioning vector alone: timestep features, their projection, class embedding.
  Tensor condition(double t, int class_id) const;

  // Applies block `b` (1-based). When `branches` is given, the gated
  // residual-branch outputs are appended to it.
  Tensor block_forward(int b, const Tensor& tokens, const Tensor& cond, BlockBranches* branches = nullptr) const;

  Tensor head(const Tensor& last_tap, const Tensor& cond) const;

  struct Output {
    Tensor eps_hat;
    std::vector<Tensor> taps;  // taps[b-1] is the output of block b
    std::vector<BlockBranches> branches;  // filled only when requested
  };
  Output forward_full(const Tensor& x, double t, int class_id, bool record_branches = false) const;

  // Exposed for tests that check sequential dependency between blocks.
  void perturb_block(int b, double amount, std::uint64_t seed);

  const Tensor& context() const noexcept { return context_; }

 private:
  struct Module {
    ModuleKind kind;
    Tensor mod;  // [d x 3d]: shift | scale | gate
    Tensor w_a;  // SA: qkv [d x 3d]; CA: q [d x d]; FF: fc1 [d x rd]
    Tensor w_b;  // SA: out [d x d]; CA: kv [d x 2d]; FF: fc2 [rd x d]
    Tensor w_c;  // CA: out [d x d]
  };
  struct Block {
    std::vector<Module> modules;
  };

  Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) const;
  Tensor run_module(const Module& m, const Tensor& normed) const;
  void check_block(int b) const;

  ToyDiTConfig cfg_;
  Tensor w_in_;      // [d x d]
  Tensor w_t1_;      // [d x d]
  Tensor w_t2_;      // [d x d]
  Tensor class_emb_; // [classes x d]
  std::vector<Block> blocks_;
  Tensor context_;   // [m x d]
  Tensor final_mod_; // [d x 2d]: shift | scale
  Tensor w_out_;     // [d x d]
};

// Sinusoidal timestep features of width `dim` (cosine half first).
Tensor timestep_features(double t, int dim);

// Matmul FLOPs only (2*m*k*p per product). Layer norms, softmax,
// elementwise ops and the adaLN modulation projections are excluded; the
// timestep MLP is counted in flops_embed.
std::uint64_t flops_block(const ToyDiTConfig& cfg);
std::uint64_t flops_embed(const ToyDiTConfig& cfg);
// Timestep MLP alone; the head needs it even when no block runs.
std::uint64_t flops_cond(const ToyDiTConfig& cfg);
std::uint64_t flops_head(const ToyDiTConfig& cfg);
std::uint64_t flops_full_step(const ToyDiTConfig& cfg);

}  // namespace lbf
