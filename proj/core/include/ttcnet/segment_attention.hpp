// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "ttcnet/layers.hpp"
#include "ttcnet/stationarity.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

/// Scale schedule for segment-wise attention: segment lengths
/// base_segment_len, 2*base_segment_len, ..., doubling per scale.
struct SegmentAttentionConfig {
    std::size_t base_segment_len = 1;
    std::size_t num_scales = 1;
    std::size_t num_heads = 1;
    /// Replicate-pad sequences whose length is not a multiple of the coarsest
    /// segment length (fully-padded key segments are masked out of the
    /// softmax). When false, an indivisible length is a config error.
    bool allow_padding = true;
    /// MsscAttention only: combine scales by learned convex weights instead
    /// of the arithmetic mean.
    bool learned_fusion = false;
};

std::size_t coarsest_segment_len(const SegmentAttentionConfig& cfg);
/// Key segments at the coarsest scale for a length-n sequence after padding.
std::size_t coarsest_segment_count(std::size_t n, const SegmentAttentionConfig& cfg);

/// Segment-wise correlation attention at a single scale, single head.
/// q: [n_q, d], k/v: [n_k, d]. Segments are contiguous length-L blocks; the
/// correlation between query segment i and key segment j is
///     c_ij = (1 / (L * sqrt(d))) * sum_t <Q_i[t], K_j[t]>,
/// weights are softmax_j(tau * c_ij + delta_j), and the output for segment i
/// is the weighted sum of value segments. rescalers.delta must have one entry
/// per key segment. Output: [n_q, d].
Tensor segment_correlation(const Tensor& q, const Tensor& k, const Tensor& v,
                           std::size_t seg_len, const Rescalers& rescalers,
                           bool allow_padding = true);

/// Predictive variant: query segment i attends with the correlation of its
/// *previous* segment (Q_{i-1} vs K_j) and collects the value segment *after*
/// the matched key (V_{j+1}) — keys and values carry a one-segment lag.
/// Boundaries replicate: Q_{-1} = Q_0, V_{last+1} = V_last. Requires at least
/// two segments and n_q == n_k.
Tensor pre_segment_correlation(const Tensor& q, const Tensor& k, const Tensor& v,
                               std::size_t seg_len, const Rescalers& rescalers,
                               bool allow_padding = true);

/// Multi-scale segment correlation: the arithmetic mean of
/// segment_correlation over the scale schedule, computed per head and
/// re-concatenated. delta is indexed at the coarsest scale and broadcast to
/// finer scales by segment containment. With num_scales = 1 and num_heads = 1
/// this is exactly segment_correlation.
Tensor mssc(const Tensor& q, const Tensor& k, const Tensor& v,
            const SegmentAttentionConfig& cfg, const Rescalers& rescalers);

/// Multi-scale form of pre_segment_correlation.
Tensor pre_mssc(const Tensor& q, const Tensor& k, const Tensor& v,
                const SegmentAttentionConfig& cfg, const Rescalers& rescalers);

/// Attention layer: learned Q/K/V projections, multi-scale segment attention
/// (predictive or plain), learned head-merge projection. The output
/// projection is zero-initialized, making the layer an exact no-op at init
/// when used as a residual branch. Optional learned convex fusion over
/// scales (cfg.learned_fusion).
class MsscAttention {
public:
    MsscAttention() = default;
    MsscAttention(ParamRegistry& reg, const std::string& name, std::size_t d,
                  const SegmentAttentionConfig& cfg, Rng& rng, bool predictive = false);

    /// Self-attention: pass the same tensor for x_q and x_kv.
    Tensor operator()(const Tensor& x_q, const Tensor& x_kv, const Rescalers& rescalers) const;

    const SegmentAttentionConfig& config() const { return cfg_; }
    bool predictive() const { return predictive_; }

private:
    Linear wq_, wk_, wv_, wo_;
    const Tensor* fusion_ = nullptr;  // [num_scales] logits when learned_fusion
    SegmentAttentionConfig cfg_;
    std::size_t d_ = 0;
    bool predictive_ = false;
};

}  // namespace ttcnet
