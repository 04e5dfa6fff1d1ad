// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "ttcnet/layers.hpp"
#include "ttcnet/spatial_encoder.hpp"
#include "ttcnet/stationarity.hpp"
#include "ttcnet/temporal_model.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

/// Full model configuration. The four ablation toggles rewrite the structure
/// at construction: multi_scale=false collapses the spatial hierarchy to one
/// global stage and the temporal attention to one scale; trend/seasonal
/// control the decomposition machinery; nonstationary controls the
/// normalize/rescale/denormalize sandwich.
struct ModelConfig {
    SpatialConfig spatial;
    std::size_t encoder_layers = 1;
    std::size_t decoder_layers = 1;
    SegmentAttentionConfig attention;  // temporal attention schedule
    std::size_t ff_width = 256;
    std::size_t window = 7;  // decomposition moving-average window (odd)
    // Per-site overrides for the decomposition window; 0 inherits `window`.
    std::size_t input_window = 0;
    std::size_t encoder_window = 0;
    std::size_t decoder_window = 0;
    /// Embedding-sequence length the model is built for (clip frames after
    /// striding). The rescaler projector's delta head is sized from it.
    std::size_t seq_len = 32;
    std::size_t frame_stride = 1;
    double dropout_rate = 0.1;
    std::size_t head_hidden = 64;
    std::size_t projector_hidden = 32;
    // Ablation toggles.
    bool multi_scale = true;
    bool trend = true;
    bool seasonal = true;
    bool nonstationary = true;

    static ModelConfig defaults();
    ModelConfig with_toggles(bool ms, bool t, bool s, bool ns) const;
};

/// Frame sequence to time-to-collision regression: hierarchical spatial
/// encoding per frame, input-level trend/seasonality split, normalization
/// with learned attention rescalers, temporal encoder-decoder,
/// de-normalization, and a small rectified regression head.
class TtcModel {
public:
    TtcModel(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng);

    /// [T, H, W, 3] -> scalar prediction (shape {1}); T must cover
    /// seq_len frames at the configured stride. `training` enables dropout
    /// draws from `rng`.
    Tensor predict(const Tensor& frames, bool training, Rng& rng) const;

    /// Embedding-level entry: [seq_len, d] -> scalar, skipping the spatial
    /// encoder.
    Tensor predict_embeddings(const Tensor& z, bool training, Rng& rng) const;

    /// The configuration as given.
    const ModelConfig& config() const { return cfg_; }
    /// The configuration actually built, with toggles applied.
    const ModelConfig& effective_config() const { return eff_; }

    const SpatialEncoder& spatial() const { return spatial_; }
    const TemporalModel& temporal() const { return temporal_; }
    /// Key segments at the temporal attention's coarsest scale.
    std::size_t num_segments() const { return num_segments_; }

private:
    ModelConfig cfg_, eff_;
    SpatialEncoder spatial_;
    TemporalModel temporal_;
    Linear head1_, head2_;
    RescalerProjector projector_;  // only when nonstationary
    std::size_t num_segments_ = 0;
    bool has_projector_ = false;
};

}  // namespace ttcnet
