// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/temporal_model.hpp"

#include <utility>

#include "ttcnet/decomposition.hpp"
#include "ttcnet/errors.hpp"

namespace ttcnet {

TemporalModel::TemporalModel(ParamRegistry& reg, const std::string& name, std::size_t d,
                             const TemporalConfig& cfg, Rng& rng)
    : cfg_(cfg), d_(d) {
    if (d == 0) throw ConfigError("temporal model: embedding dim must be >= 1");
    if (cfg.encoder_layers == 0 || cfg.decoder_layers == 0) {
        throw ConfigError("temporal model: encoder and decoder need at least one layer each");
    }
    if (cfg.window % 2 == 0 || cfg.window == 0) {
        throw ConfigError("temporal model: decomposition window must be odd, got " +
                          std::to_string(cfg.window));
    }
    if (cfg_.decoder_window == 0) cfg_.decoder_window = cfg_.window;
    if (cfg_.decoder_window % 2 == 0) {
        throw ConfigError("temporal model: decoder decomposition window must be odd, got " +
                          std::to_string(cfg_.decoder_window));
    }
    for (std::size_t i = 0; i < cfg.encoder_layers; ++i) {
        const std::string p = name + ".enc" + std::to_string(i);
        encoder_.push_back(EncoderLayer{
            MsscAttention(reg, p + ".attn", d, cfg.attention, rng),
            FeedForward(reg, p + ".ff", d, cfg.ff_width, d, rng)});
    }
    for (std::size_t i = 0; i < cfg.decoder_layers; ++i) {
        const std::string p = name + ".dec" + std::to_string(i);
        DecoderLayer layer{
            MsscAttention(reg, p + ".self", d, cfg.attention, rng),
            MsscAttention(reg, p + ".cross", d, cfg.attention, rng, /*predictive=*/true),
            FeedForward(reg, p + ".ff", d, cfg.ff_width, d, rng),
            {}};
        if (cfg.seasonal && cfg.trend) {
            for (std::size_t j = 0; j < 3; ++j) {
                layer.trend_proj[j] = Linear(reg, p + ".trend" + std::to_string(j), d, d, rng,
                                             Init::Zero);
            }
        }
        decoder_.push_back(std::move(layer));
    }
}

Tensor TemporalModel::encoder_forward(const Tensor& z_prime, const Rescalers& rescalers) const {
    if (d_ == 0) throw UsageError("TemporalModel: used before construction");
    if (z_prime.rank() != 2 || z_prime.dim(1) != d_) {
        throw DimensionError("temporal encoder: expected [n, " + std::to_string(d_) + "], got " +
                             shape_str(z_prime.shape()));
    }
    Tensor x = z_prime;
    for (const EncoderLayer& layer : encoder_) {
        x = add(x, layer.attn(x, x, rescalers));
        x = add(x, layer.ff(x));
        if (cfg_.seasonal) x = decompose(x, cfg_.window).seasonality;
    }
    return x;
}

Tensor TemporalModel::decoder_forward(const Tensor& z_enc, const Tensor& trend_init,
                                      const Tensor& seasonal_init,
                                      const Rescalers& rescalers) const {
    if (d_ == 0) throw UsageError("TemporalModel: used before construction");
    if (seasonal_init.rank() != 2 || seasonal_init.dim(1) != d_) {
        throw DimensionError("temporal decoder: expected seasonal stream [n, " +
                             std::to_string(d_) + "], got " + shape_str(seasonal_init.shape()));
    }
    if (cfg_.trend && (!trend_init.defined() || trend_init.shape() != seasonal_init.shape())) {
        throw DimensionError("temporal decoder: trend seed must match the seasonal stream shape");
    }

    Tensor s = seasonal_init;
    Tensor t_acc = cfg_.trend ? trend_init : Tensor();
    for (const DecoderLayer& layer : decoder_) {
        // One decomposition after each sub-block; extracted trends leave the
        // seasonal stream through zero-initialized projections.
        auto split = [&](Tensor x, const Linear& proj) {
            if (!cfg_.seasonal) return x;
            DecompositionResult dec = decompose(x, cfg_.decoder_window);
            if (cfg_.trend) t_acc = add(t_acc, proj(dec.trend));
            return dec.seasonality;
        };
        s = split(add(s, layer.self_attn(s, s, rescalers)), layer.trend_proj[0]);
        s = split(add(s, layer.cross_attn(s, z_enc, rescalers)), layer.trend_proj[1]);
        s = split(add(s, layer.ff(s)), layer.trend_proj[2]);
    }
    return cfg_.trend ? add(s, t_acc) : s;
}

}  // namespace ttcnet
