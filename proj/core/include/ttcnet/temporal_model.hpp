// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ttcnet/layers.hpp"
#include "ttcnet/segment_attention.hpp"
#include "ttcnet/stationarity.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

struct TemporalConfig {
    std::size_t encoder_layers = 1;
    std::size_t decoder_layers = 1;
    SegmentAttentionConfig attention;
    std::size_t ff_width = 256;
    /// Moving-average window of encoder decompositions (odd).
    std::size_t window = 7;
    /// Decoder decomposition window; 0 inherits `window`.
    std::size_t decoder_window = 0;
    /// In-layer trend/seasonality decomposition. When false, streams pass
    /// through whole — no seasonal isolation anywhere in the layers.
    bool seasonal = true;
    /// Trend stream: accumulate projected in-layer trends onto the initial
    /// trend and add the total back to the decoder output. When false the
    /// trend path is absent entirely.
    bool trend = true;
};

/// Encoder-decoder over embedding sequences. The encoder refines the
/// normalized sequence and keeps only its seasonal part per layer; the
/// decoder runs a seasonal stream (self-attention, predictive cross-attention
/// over the encoder output, feed-forward — decomposing after each) alongside
/// an additive trend accumulator.
class TemporalModel {
public:
    TemporalModel() = default;
    TemporalModel(ParamRegistry& reg, const std::string& name, std::size_t d,
                  const TemporalConfig& cfg, Rng& rng);

    /// [n, d] -> [n, d]. Per layer: x += self_attention(x); x += ff(x);
    /// then (seasonal mode) keep only the seasonal component.
    Tensor encoder_forward(const Tensor& z_prime, const Rescalers& rescalers) const;

    /// seasonal_init seeds the seasonal stream; trend_init seeds the trend
    /// accumulator (ignored, may be undefined, when the trend path is off).
    /// Returns final seasonal stream plus accumulated trend.
    Tensor decoder_forward(const Tensor& z_enc, const Tensor& trend_init,
                           const Tensor& seasonal_init, const Rescalers& rescalers) const;

    const TemporalConfig& config() const { return cfg_; }

private:
    struct EncoderLayer {
        MsscAttention attn;
        FeedForward ff;
    };
    struct DecoderLayer {
        MsscAttention self_attn;
        MsscAttention cross_attn;  // predictive
        FeedForward ff;
        std::array<Linear, 3> trend_proj;  // zero-initialized, one per decomposition
    };

    TemporalConfig cfg_;
    std::size_t d_ = 0;
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> decoder_;
};

}  // namespace ttcnet
