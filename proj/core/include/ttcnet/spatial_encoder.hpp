// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "ttcnet/layers.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

/// One stage of the hierarchical frame encoder.
struct SpatialStageConfig {
    /// Token-pool factor applied on entry (1 = none; must be 1 for stage 0).
    /// A factor f mean-pools f x f token cells, shrinking each grid side by f.
    std::size_t pool = 1;
    /// Channel width inside this stage. Must strictly increase across pooling
    /// stages and stay fixed otherwise.
    std::size_t width = 32;
    /// Full attention over the token grid; otherwise attention is restricted
    /// to non-overlapping mask units. Local stages must precede global ones.
    bool global_attention = false;
    /// Side length (in tokens) of a local mask unit; must divide the grid
    /// side. Ignored for global stages. mask_unit == grid side is equivalent
    /// to global attention.
    std::size_t mask_unit = 1;
    std::size_t blocks = 1;
};

struct SpatialConfig {
    std::size_t frame_size = 32;  // square H = W input
    std::size_t patch_size = 4;
    std::size_t embed_dim = 128;  // output embedding dimension d
    std::size_t num_heads = 4;
    std::size_t ff_mult = 2;  // feed-forward hidden = ff_mult * width
    std::vector<SpatialStageConfig> stages;

    /// Three-stage hierarchy: two local stages, then a global one, with token
    /// pooling and channel widening in between.
    static SpatialConfig defaults();
    /// Single global stage at full resolution — the multi-scale-off variant,
    /// a plain single-resolution transformer encoder over patches.
    static SpatialConfig single_stage();
};

/// Hierarchical spatial stream: patchify + absolute positional encoding, then
/// attention stages of decreasing token count and increasing width, finally
/// mean-pooled and projected to one embedding per frame.
class SpatialEncoder {
public:
    SpatialEncoder() = default;
    SpatialEncoder(ParamRegistry& reg, const std::string& name, const SpatialConfig& cfg,
                   Rng& rng);

    /// [H, W, 3] -> [tokens, width0]: linear patch projection plus the fixed
    /// sinusoidal positional encoding.
    Tensor patchify(const Tensor& frame) const;

    /// Runs one stage (entry pooling/widening, then its attention blocks).
    /// tokens must be the previous stage's output, row-major over the grid.
    Tensor stage_forward(const Tensor& tokens, std::size_t stage) const;

    /// [H, W, 3] -> [d]: all stages, token mean-pool, output projection.
    Tensor encode_frame(const Tensor& frame) const;

    /// [T, H, W, 3] -> [T, d]: encode_frame applied per frame.
    Tensor encode_clip(const Tensor& frames) const;

    const SpatialConfig& config() const { return cfg_; }
    /// The fixed positional encoding added after patch projection.
    const Tensor& positional_encoding() const { return pe_; }
    /// Token-grid side length at the given stage.
    std::size_t grid_side(std::size_t stage) const;

private:
    struct Block {
        Linear wq, wk, wv, wo;
        FeedForward ff;
    };
    struct Stage {
        std::size_t side = 0;   // grid side while this stage runs
        std::size_t width = 0;
        std::size_t in_tokens = 0, in_width = 0;  // expected input shape
        std::size_t groups = 1, unit_tokens = 0;  // mask-unit split
        std::vector<std::size_t> group_order, group_inverse;  // empty = identity
        std::vector<std::size_t> pool_order;  // empty = no entry pooling
        std::size_t pool = 1;
        bool widened = false;
        Linear widen;
        std::vector<Block> blocks;
    };

    Tensor attention(const Tensor& x, const Stage& st, const Block& blk) const;

    SpatialConfig cfg_;
    std::shared_ptr<std::vector<std::size_t>> patch_index_;
    Tensor pe_;  // [tokens0, width0], untracked constant
    std::vector<Stage> stages_;
    Linear patch_proj_, head_;
    std::size_t tokens0_ = 0, patch_dim_ = 0;
};

}  // namespace ttcnet
