// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/spatial_encoder.hpp"

#include <cmath>
#include <utility>

#include "ttcnet/errors.hpp"

namespace ttcnet {

namespace {

/// Standard sinusoidal encoding over the flattened token index:
/// pe[t, 2i] = sin(t / 10000^(2i/C)), pe[t, 2i+1] = cos(same angle).
Tensor sinusoidal_encoding(std::size_t positions, std::size_t channels) {
    Tensor pe(Shape{positions, channels});
    for (std::size_t t = 0; t < positions; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double freq =
                std::pow(10000.0, -static_cast<double>(c - (c % 2)) / static_cast<double>(channels));
            const double angle = static_cast<double>(t) * freq;
            pe.data()[t * channels + c] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

/// Row order that lists tokens unit-by-unit for a side x side grid split into
/// unit x unit mask windows, plus its inverse.
void mask_unit_order(std::size_t side, std::size_t unit, std::vector<std::size_t>& order,
                     std::vector<std::size_t>& inverse) {
    const std::size_t per_axis = side / unit;
    order.resize(side * side);
    inverse.resize(side * side);
    std::size_t pos = 0;
    for (std::size_t uy = 0; uy < per_axis; ++uy)
        for (std::size_t ux = 0; ux < per_axis; ++ux)
            for (std::size_t iy = 0; iy < unit; ++iy)
                for (std::size_t ix = 0; ix < unit; ++ix) {
                    const std::size_t token = (uy * unit + iy) * side + (ux * unit + ix);
                    order[pos] = token;
                    inverse[token] = pos;
                    ++pos;
                }
}

/// Row order that lists tokens pool-cell by pool-cell (f*f consecutive rows
/// form one cell) for mean pooling.
std::vector<std::size_t> pool_cell_order(std::size_t side, std::size_t f) {
    const std::size_t out_side = side / f;
    std::vector<std::size_t> order(side * side);
    std::size_t pos = 0;
    for (std::size_t cy = 0; cy < out_side; ++cy)
        for (std::size_t cx = 0; cx < out_side; ++cx)
            for (std::size_t iy = 0; iy < f; ++iy)
                for (std::size_t ix = 0; ix < f; ++ix)
                    order[pos++] = (cy * f + iy) * side + (cx * f + ix);
    return order;
}

}  // namespace

SpatialConfig SpatialConfig::defaults() {
    SpatialConfig cfg;
    cfg.stages = {
        {/*pool=*/1, /*width=*/32, /*global=*/false, /*mask_unit=*/4, /*blocks=*/1},
        {/*pool=*/2, /*width=*/64, /*global=*/false, /*mask_unit=*/2, /*blocks=*/1},
        {/*pool=*/2, /*width=*/128, /*global=*/true, /*mask_unit=*/1, /*blocks=*/1},
    };
    return cfg;
}

SpatialConfig SpatialConfig::single_stage() {
    SpatialConfig cfg;
    cfg.stages = {
        {/*pool=*/1, /*width=*/128, /*global=*/true, /*mask_unit=*/1, /*blocks=*/1},
    };
    return cfg;
}

SpatialEncoder::SpatialEncoder(ParamRegistry& reg, const std::string& name,
                               const SpatialConfig& cfg, Rng& rng)
    : cfg_(cfg) {
    if (cfg.frame_size == 0 || cfg.patch_size == 0 || cfg.frame_size % cfg.patch_size != 0) {
        throw ConfigError("spatial encoder: frame size " + std::to_string(cfg.frame_size) +
                          " not divisible by patch size " + std::to_string(cfg.patch_size));
    }
    if (cfg.stages.empty()) throw ConfigError("spatial encoder: at least one stage required");
    if (cfg.embed_dim == 0) throw ConfigError("spatial encoder: embed_dim must be >= 1");
    if (cfg.num_heads == 0) throw ConfigError("spatial encoder: num_heads must be >= 1");

    const std::size_t side0 = cfg.frame_size / cfg.patch_size;
    tokens0_ = side0 * side0;
    patch_dim_ = cfg.patch_size * cfg.patch_size * 3;

    // Patch gathering index: token (gy, gx), then (py, px, channel) within
    // the patch, mapping into the row-major [H, W, 3] frame.
    patch_index_ = std::make_shared<std::vector<std::size_t>>();
    patch_index_->reserve(tokens0_ * patch_dim_);
    const std::size_t W = cfg.frame_size, p = cfg.patch_size;
    for (std::size_t gy = 0; gy < side0; ++gy)
        for (std::size_t gx = 0; gx < side0; ++gx)
            for (std::size_t py = 0; py < p; ++py)
                for (std::size_t px = 0; px < p; ++px)
                    for (std::size_t c = 0; c < 3; ++c)
                        patch_index_->push_back(((gy * p + py) * W + (gx * p + px)) * 3 + c);

    pe_ = sinusoidal_encoding(tokens0_, cfg.stages[0].width);

    patch_proj_ = Linear(reg, name + ".patch", patch_dim_, cfg.stages[0].width, rng);

    std::size_t side = side0;
    std::size_t prev_width = cfg.stages[0].width;
    bool seen_global = false;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const SpatialStageConfig& sc = cfg.stages[s];
        Stage st;
        st.in_tokens = side * side;
        st.in_width = prev_width;
        st.pool = sc.pool;
        if (s == 0) {
            if (sc.pool != 1) throw ConfigError("spatial encoder: stage 0 cannot pool");
        } else if (sc.pool > 1) {
            if (side % sc.pool != 0) {
                throw ConfigError("spatial encoder: pool factor " + std::to_string(sc.pool) +
                                  " does not divide grid side " + std::to_string(side));
            }
            if (sc.width <= prev_width) {
                throw ConfigError("spatial encoder: pooling stage " + std::to_string(s) +
                                  " must widen channels (" + std::to_string(prev_width) + " -> " +
                                  std::to_string(sc.width) + ")");
            }
            st.pool_order = pool_cell_order(side, sc.pool);
            side /= sc.pool;
            st.widened = true;
            st.widen = Linear(reg, name + ".s" + std::to_string(s) + ".widen", prev_width,
                              sc.width, rng);
        } else if (sc.width != prev_width) {
            throw ConfigError("spatial encoder: width may only change across a pooling stage");
        }
        st.side = side;
        st.width = sc.width;
        if (sc.width % cfg.num_heads != 0) {
            throw ConfigError("spatial encoder: stage width " + std::to_string(sc.width) +
                              " not divisible by " + std::to_string(cfg.num_heads) + " heads");
        }
        if (sc.global_attention) {
            seen_global = true;
            st.groups = 1;
            st.unit_tokens = side * side;
        } else {
            if (seen_global) {
                throw ConfigError("spatial encoder: local stage " + std::to_string(s) +
                                  " after a global stage");
            }
            if (sc.mask_unit == 0 || side % sc.mask_unit != 0) {
                throw ConfigError("spatial encoder: mask unit " + std::to_string(sc.mask_unit) +
                                  " does not divide grid side " + std::to_string(side));
            }
            const std::size_t per_axis = side / sc.mask_unit;
            st.groups = per_axis * per_axis;
            st.unit_tokens = sc.mask_unit * sc.mask_unit;
            if (st.groups > 1) mask_unit_order(side, sc.mask_unit, st.group_order, st.group_inverse);
        }
        if (sc.blocks == 0) throw ConfigError("spatial encoder: stage needs at least one block");
        const std::string sp = name + ".s" + std::to_string(s);
        for (std::size_t b = 0; b < sc.blocks; ++b) {
            const std::string bp = sp + ".b" + std::to_string(b);
            Block blk{Linear(reg, bp + ".attn.wq", sc.width, sc.width, rng),
                      Linear(reg, bp + ".attn.wk", sc.width, sc.width, rng),
                      Linear(reg, bp + ".attn.wv", sc.width, sc.width, rng),
                      Linear(reg, bp + ".attn.wo", sc.width, sc.width, rng, Init::Zero),
                      FeedForward(reg, bp + ".ff", sc.width, cfg.ff_mult * sc.width, sc.width, rng)};
            st.blocks.push_back(std::move(blk));
        }
        prev_width = sc.width;
        stages_.push_back(std::move(st));
    }
    head_ = Linear(reg, name + ".head", prev_width, cfg.embed_dim, rng);
}

std::size_t SpatialEncoder::grid_side(std::size_t stage) const {
    if (stage >= stages_.size()) throw UsageError("spatial encoder: stage index out of range");
    return stages_[stage].side;
}

Tensor SpatialEncoder::patchify(const Tensor& frame) const {
    if (stages_.empty()) throw UsageError("SpatialEncoder: used before construction");
    if (frame.rank() != 3 || frame.dim(0) != cfg_.frame_size || frame.dim(1) != cfg_.frame_size ||
        frame.dim(2) != 3) {
        throw DimensionError("spatial encoder: expected frame [" + std::to_string(cfg_.frame_size) +
                             ", " + std::to_string(cfg_.frame_size) + ", 3], got " +
                             shape_str(frame.shape()));
    }
    Tensor patches = gather_flat(reshape(frame, {frame.size()}), patch_index_,
                                 {tokens0_, patch_dim_});
    return add(patch_proj_(patches), pe_);
}

Tensor SpatialEncoder::attention(const Tensor& x, const Stage& st, const Block& blk) const {
    const std::size_t n = st.side * st.side, C = st.width;
    const std::size_t H = cfg_.num_heads, dh = C / H;
    const std::size_t G = st.groups, m = st.unit_tokens;

    auto split = [&](Tensor t) {
        if (!st.group_order.empty()) t = gather_rows(t, st.group_order);
        // [n, C] -> [G, H, m, dh] -> [G*H, m, dh]
        return reshape(permute_axes(reshape(std::move(t), {G, m, H, dh}), {0, 2, 1, 3}),
                       {G * H, m, dh});
    };
    Tensor qh = split(blk.wq(x));
    Tensor kh = split(blk.wk(x));
    Tensor vh = split(blk.wv(x));

    Tensor scores = scale(bmm_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor y = bmm(softmax_last(scores), vh);
    y = reshape(permute_axes(reshape(std::move(y), {G, H, m, dh}), {0, 2, 1, 3}), {n, C});
    if (!st.group_inverse.empty()) y = gather_rows(y, st.group_inverse);
    return blk.wo(y);
}

Tensor SpatialEncoder::stage_forward(const Tensor& tokens, std::size_t stage) const {
    if (stage >= stages_.size()) throw UsageError("spatial encoder: stage index out of range");
    const Stage& st = stages_[stage];
    if (tokens.rank() != 2 || tokens.dim(0) != st.in_tokens || tokens.dim(1) != st.in_width) {
        throw DimensionError("spatial encoder: stage " + std::to_string(stage) + " expects [" +
                             std::to_string(st.in_tokens) + ", " + std::to_string(st.in_width) +
                             "], got " + shape_str(tokens.shape()));
    }
    Tensor x = tokens;
    if (!st.pool_order.empty()) {
        const std::size_t cell = st.pool * st.pool;
        const std::size_t n_out = st.in_tokens / cell;
        x = gather_rows(x, st.pool_order);
        // Cell-major rows -> [n_out, C, cell] -> mean over the cell.
        x = mean_last(permute_axes(reshape(std::move(x), {n_out, cell, st.in_width}), {0, 2, 1}));
        x = st.widen(x);
    }
    for (const Block& blk : st.blocks) {
        x = add(x, attention(x, st, blk));
        x = add(x, blk.ff(x));
    }
    return x;
}

Tensor SpatialEncoder::encode_frame(const Tensor& frame) const {
    Tensor x = patchify(frame);
    for (std::size_t s = 0; s < stages_.size(); ++s) x = stage_forward(x, s);
    // Mean over tokens, then project to the embedding dimension.
    Tensor pooled = reshape(mean_last(transpose_last2(std::move(x))), {1, stages_.back().width});
    return reshape(head_(pooled), {cfg_.embed_dim});
}

Tensor SpatialEncoder::encode_clip(const Tensor& frames) const {
    if (frames.rank() != 4) {
        throw DimensionError("spatial encoder: expected clip [T, H, W, 3], got " +
                             shape_str(frames.shape()));
    }
    const std::size_t T = frames.dim(0);
    if (T == 0) throw InputError("spatial encoder: empty clip");
    const std::size_t per = frames.size() / T;
    Tensor rows = reshape(frames, {T, per});
    std::vector<Tensor> embeddings;
    embeddings.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor frame = reshape(gather_rows(rows, {t}),
                               {frames.dim(1), frames.dim(2), frames.dim(3)});
        embeddings.push_back(encode_frame(frame));
    }
    return reshape(concat1d(embeddings), {T, cfg_.embed_dim});
}

}  // namespace ttcnet
