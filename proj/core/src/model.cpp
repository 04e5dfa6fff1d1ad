// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/model.hpp"

#include <utility>
#include <vector>

#include "ttcnet/decomposition.hpp"
#include "ttcnet/errors.hpp"

namespace ttcnet {

namespace {

/// Multi-scale-off spatial stream: one global stage at the embedding width —
/// a plain single-resolution transformer over patches.
SpatialConfig reduce_spatial(const SpatialConfig& cfg) {
    SpatialConfig out = cfg;
    out.stages = {{/*pool=*/1, /*width=*/cfg.embed_dim, /*global=*/true, /*mask_unit=*/1,
                   /*blocks=*/cfg.stages.empty() ? 1 : cfg.stages.front().blocks}};
    return out;
}

ModelConfig apply_toggles(ModelConfig cfg) {
    if (!cfg.multi_scale) {
        cfg.spatial = reduce_spatial(cfg.spatial);
        cfg.attention.num_scales = 1;
    }
    return cfg;
}

TemporalConfig temporal_part(const ModelConfig& cfg) {
    TemporalConfig tc;
    tc.encoder_layers = cfg.encoder_layers;
    tc.decoder_layers = cfg.decoder_layers;
    tc.attention = cfg.attention;
    tc.ff_width = cfg.ff_width;
    tc.window = cfg.encoder_window ? cfg.encoder_window : cfg.window;
    tc.decoder_window = cfg.decoder_window ? cfg.decoder_window : cfg.window;
    tc.seasonal = cfg.seasonal;
    tc.trend = cfg.trend;
    return tc;
}

}  // namespace

ModelConfig ModelConfig::defaults() {
    ModelConfig cfg;
    cfg.spatial = SpatialConfig::defaults();
    cfg.attention.base_segment_len = 1;
    cfg.attention.num_scales = 2;
    cfg.attention.num_heads = 4;
    return cfg;
}

ModelConfig ModelConfig::with_toggles(bool ms, bool t, bool s, bool ns) const {
    ModelConfig cfg = *this;
    cfg.multi_scale = ms;
    cfg.trend = t;
    cfg.seasonal = s;
    cfg.nonstationary = ns;
    return cfg;
}

TtcModel::TtcModel(ParamRegistry& reg, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg), eff_(apply_toggles(cfg)) {
    if (eff_.seq_len < 2) throw ConfigError("model: seq_len must be >= 2");
    if (eff_.frame_stride == 0) throw ConfigError("model: frame_stride must be >= 1");
    if (eff_.dropout_rate < 0.0 || eff_.dropout_rate >= 1.0) {
        throw ConfigError("model: dropout_rate must lie in [0, 1)");
    }
    const std::size_t in_win = eff_.input_window ? eff_.input_window : eff_.window;
    if (in_win % 2 == 0) {
        throw ConfigError("model: input decomposition window must be odd, got " +
                          std::to_string(in_win));
    }
    const std::size_t coarsest = coarsest_segment_len(eff_.attention);
    if (eff_.seq_len < 2 * coarsest) {
        throw ConfigError("model: seq_len " + std::to_string(eff_.seq_len) +
                          " must cover at least two coarsest attention segments (len " +
                          std::to_string(coarsest) + ") for predictive cross-attention");
    }
    num_segments_ = coarsest_segment_count(eff_.seq_len, eff_.attention);

    const std::size_t d = eff_.spatial.embed_dim;
    spatial_ = SpatialEncoder(reg, "spatial", eff_.spatial, rng);
    temporal_ = TemporalModel(reg, "temporal", d, temporal_part(eff_), rng);
    head1_ = Linear(reg, "head.l1", d, eff_.head_hidden, rng);
    // Bias starts at one so the rectified output begins inside the usual
    // label range instead of pinned at zero.
    head2_ = Linear(reg, "head.l2", eff_.head_hidden, 1, rng, Init::Xavier, /*bias_init=*/1.0);
    if (eff_.nonstationary) {
        // Constructed last so models differing only in this toggle share the
        // same draws for every other parameter.
        projector_ = RescalerProjector(reg, "ns.proj", d, eff_.projector_hidden, num_segments_,
                                       rng);
        has_projector_ = true;
    }
}

Tensor TtcModel::predict_embeddings(const Tensor& z, bool training, Rng& rng) const {
    const std::size_t d = eff_.spatial.embed_dim;
    if (z.rank() != 2 || z.dim(1) != d) {
        throw DimensionError("model: expected embeddings [n, " + std::to_string(d) + "], got " +
                             shape_str(z.shape()));
    }
    if (z.dim(0) != eff_.seq_len) {
        throw InputError("model: clip yields " + std::to_string(z.dim(0)) +
                         " embeddings, model was built for " + std::to_string(eff_.seq_len));
    }

    // Input-level trend/seasonality split feeding the decoder streams.
    Tensor trend0, seasonal0;
    if (eff_.trend) {
        DecompositionResult dec =
            decompose(z, eff_.input_window ? eff_.input_window : eff_.window);
        trend0 = dec.trend;
        seasonal0 = dec.seasonality;
    }

    Tensor z_prime = z;
    SeriesStats stats;
    Rescalers rescalers = identity_rescalers(num_segments_);
    if (eff_.nonstationary) {
        auto norm = normalize(z);
        z_prime = norm.first;
        stats = std::move(norm.second);
        rescalers = projector_(stats, z);
        if (eff_.trend) {
            // Split the affine map across the streams so their sum matches
            // the normalized input: (T0 - mu)/sigma + S0/sigma = z'.
            trend0 = div_rowvec(sub_rowvec(trend0, stats.mu), stats.sigma);
            seasonal0 = div_rowvec(seasonal0, stats.sigma);
        }
    }

    Tensor z_enc = temporal_.encoder_forward(z_prime, rescalers);
    Tensor z_dec = temporal_.decoder_forward(z_enc, trend0,
                                             eff_.trend ? seasonal0 : z_prime, rescalers);
    if (eff_.nonstationary) z_dec = denormalize(z_dec, stats);

    // Temporal mean-pool, then the two-layer rectified head.
    Tensor pooled = reshape(mean_last(transpose_last2(std::move(z_dec))), {1, d});
    Tensor h = relu(head1_(pooled));
    h = dropout(h, eff_.dropout_rate, training, rng);
    return reshape(relu(head2_(h)), {1});
}

Tensor TtcModel::predict(const Tensor& frames, bool training, Rng& rng) const {
    if (frames.rank() != 4) {
        throw DimensionError("model: expected clip [T, H, W, 3], got " +
                             shape_str(frames.shape()));
    }
    const std::size_t total = frames.dim(0);
    const std::size_t stride = eff_.frame_stride;
    const std::size_t usable = (total + stride - 1) / stride;
    if (usable != eff_.seq_len) {
        throw InputError("model: clip has " + std::to_string(total) + " frames at stride " +
                         std::to_string(stride) + " -> " + std::to_string(usable) +
                         " embeddings, model was built for " + std::to_string(eff_.seq_len));
    }
    Tensor sampled = frames;
    if (stride > 1) {
        std::vector<std::size_t> keep;
        keep.reserve(eff_.seq_len);
        for (std::size_t t = 0; t < total; t += stride) keep.push_back(t);
        const std::size_t per = frames.size() / total;
        sampled = reshape(gather_rows(reshape(frames, {total, per}), keep),
                          {keep.size(), frames.dim(1), frames.dim(2), frames.dim(3)});
    }
    return predict_embeddings(spatial_.encode_clip(sampled), training, rng);
}

}  // namespace ttcnet
