// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Segment-wise correlation attention. A length-L segment of an [n, d]
// sequence is a contiguous block of L rows, so flattening segments gives an
// [n/L, L*d] matrix and the segment-correlation matrix is one transposed
// matrix product — all the multi-scale machinery below is reshapes around
// that single idea.

#include "ttcnet/segment_attention.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include "ttcnet/errors.hpp"

namespace ttcnet {

namespace {

struct ScaleSchedule {
    std::size_t coarsest_len;
    std::size_t num_scales;
};

ScaleSchedule validate_cfg(const SegmentAttentionConfig& cfg) {
    if (cfg.base_segment_len == 0) throw ConfigError("segment attention: base_segment_len must be >= 1");
    if (cfg.num_scales == 0) throw ConfigError("segment attention: num_scales must be >= 1");
    if (cfg.num_heads == 0) throw ConfigError("segment attention: num_heads must be >= 1");
    return {cfg.base_segment_len << (cfg.num_scales - 1), cfg.num_scales};
}

std::size_t padded_len(std::size_t n, std::size_t multiple) {
    return ((n + multiple - 1) / multiple) * multiple;
}

/// Replicate the final row until the length reaches n_pad.
Tensor pad_rows(const Tensor& x, std::size_t n_pad) {
    const std::size_t n = x.dim(0);
    if (n_pad == n) return x;
    std::vector<std::size_t> idx(n_pad);
    for (std::size_t i = 0; i < n_pad; ++i) idx[i] = i < n ? i : n - 1;
    return gather_rows(x, idx);
}

/// [n_pad, d] -> [H, n_pad, dh]; a pure view for one head.
Tensor heads_view(const Tensor& x, std::size_t heads, std::size_t dh) {
    const std::size_t n = x.dim(0);
    if (heads == 1) return reshape(x, {1, n, x.dim(1)});
    return permute_axes(reshape(x, {n, heads, dh}), {1, 0, 2});
}

Tensor heads_unview(const Tensor& y, std::size_t heads, std::size_t d) {
    const std::size_t n = y.dim(1);
    if (heads == 1) return reshape(y, {n, d});
    return reshape(permute_axes(y, {1, 0, 2}), {n, d});
}

/// Shift whole segments along axis 1 of [H, ns, seg], replicating at the
/// edge: dir=-1 prepends segment 0 (queries look one segment back), dir=+1
/// appends the final segment (values sit one segment ahead).
Tensor shift_segments(const Tensor& t, int dir) {
    const std::size_t h = t.dim(0), ns = t.dim(1), seg = t.dim(2);
    std::vector<std::size_t> idx(h * ns);
    for (std::size_t hh = 0; hh < h; ++hh) {
        for (std::size_t i = 0; i < ns; ++i) {
            std::size_t src;
            if (dir < 0) {
                src = (i == 0) ? 0 : i - 1;
            } else {
                src = (i + 1 < ns) ? i + 1 : ns - 1;
            }
            idx[hh * ns + i] = hh * ns + src;
        }
    }
    return reshape(gather_rows(reshape(t, {h * ns, seg}), idx), {h, ns, seg});
}

/// delta holds one entry per coarsest-scale key segment; finer scales reuse
/// the entry of the coarse segment that contains them.
Tensor delta_for_scale(const Tensor& delta, std::size_t seg_len, std::size_t coarsest_len,
                       std::size_t ns_k) {
    if (seg_len == coarsest_len) {
        if (delta.size() != ns_k) {
            throw DimensionError("segment attention: delta has " + std::to_string(delta.size()) +
                                 " entries, expected " + std::to_string(ns_k) +
                                 " (one per coarsest key segment)");
        }
        return delta;
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(ns_k);
    for (std::size_t j = 0; j < ns_k; ++j) (*idx)[j] = (j * seg_len) / coarsest_len;
    if (delta.size() * coarsest_len != ns_k * seg_len) {
        throw DimensionError("segment attention: delta entries do not cover the key segments");
    }
    return gather_flat(delta, std::move(idx), {ns_k});
}

/// One attention pass at one scale over head-split inputs [H, n_pad, dh].
/// n_k_orig is the pre-padding key length: key segments made entirely of
/// padding are pushed to -inf before the softmax.
Tensor scale_core(const Tensor& qh, const Tensor& kh, const Tensor& vh, std::size_t seg_len,
                  std::size_t n_k_orig, const Rescalers& rescalers, std::size_t coarsest_len,
                  bool predictive) {
    const std::size_t heads = qh.dim(0);
    const std::size_t n_pad_q = qh.dim(1), n_pad_k = kh.dim(1);
    const std::size_t dh = qh.dim(2);
    const std::size_t ns_q = n_pad_q / seg_len, ns_k = n_pad_k / seg_len;

    Tensor qs = reshape(qh, {heads, ns_q, seg_len * dh});
    Tensor ks = reshape(kh, {heads, ns_k, seg_len * dh});
    Tensor vs = reshape(vh, {heads, ns_k, seg_len * dh});
    if (predictive) {
        if (ns_q < 2 || ns_k < 2) {
            throw ConfigError("predictive segment attention needs at least 2 segments, got " +
                              std::to_string(ns_k));
        }
        qs = shift_segments(qs, -1);
        vs = shift_segments(vs, +1);
    }

    Tensor scores = scale(bmm_nt(qs, ks),
                          1.0 / (static_cast<double>(seg_len) * std::sqrt(static_cast<double>(dh))));
    scores = mul_scalar_tensor(scores, rescalers.tau);
    scores = add_rowvec(scores, delta_for_scale(rescalers.delta, seg_len, coarsest_len, ns_k));

    bool any_masked = false;
    Tensor mask(Shape{ns_k});
    for (std::size_t j = 0; j < ns_k; ++j) {
        if (j * seg_len >= n_k_orig) {
            mask.data()[j] = -1e30;
            any_masked = true;
        }
    }
    if (any_masked) scores = add_rowvec(scores, mask);

    Tensor weights = softmax_last(scores);
    return reshape(bmm(weights, vs), {heads, n_pad_q, dh});
}

/// Shared driver for all four public functions plus the layer's fusion path.
/// When fusion_weights is null, scales are combined by arithmetic mean;
/// otherwise by the given per-scale scalar weights ([num_scales], typically a
/// softmax output).
Tensor run_segment_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                             const SegmentAttentionConfig& cfg, const Rescalers& rescalers,
                             bool predictive, const Tensor* fusion_weights) {
    const ScaleSchedule sched = validate_cfg(cfg);
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
        throw DimensionError("segment attention: q/k/v must be [n, d]");
    }
    const std::size_t d = q.dim(1);
    if (k.dim(1) != d || v.dim(1) != d) {
        throw DimensionError("segment attention: q/k/v feature dims disagree");
    }
    if (k.dim(0) != v.dim(0)) throw DimensionError("segment attention: k/v lengths disagree");
    if (d % cfg.num_heads != 0) {
        throw ConfigError("segment attention: feature dim " + std::to_string(d) +
                          " not divisible by " + std::to_string(cfg.num_heads) + " heads");
    }
    const std::size_t n_q = q.dim(0), n_k = k.dim(0);
    if (predictive && n_q != n_k) {
        throw DimensionError("predictive segment attention: query/key lengths must match");
    }
    if (sched.coarsest_len > n_q || sched.coarsest_len > n_k) {
        throw ConfigError("segment attention: coarsest segment length " +
                          std::to_string(sched.coarsest_len) + " exceeds sequence length");
    }
    const std::size_t n_pad_q = padded_len(n_q, sched.coarsest_len);
    const std::size_t n_pad_k = padded_len(n_k, sched.coarsest_len);
    if (!cfg.allow_padding && (n_pad_q != n_q || n_pad_k != n_k)) {
        throw ConfigError("segment attention: length " + std::to_string(n_q) + "/" +
                          std::to_string(n_k) + " not divisible by coarsest segment length " +
                          std::to_string(sched.coarsest_len) + " and padding is disabled");
    }

    const std::size_t dh = d / cfg.num_heads;
    Tensor qh = heads_view(pad_rows(q, n_pad_q), cfg.num_heads, dh);
    Tensor kh = heads_view(pad_rows(k, n_pad_k), cfg.num_heads, dh);
    Tensor vh = heads_view(pad_rows(v, n_pad_k), cfg.num_heads, dh);

    Tensor acc;
    for (std::size_t s = 0; s < sched.num_scales; ++s) {
        const std::size_t seg_len = cfg.base_segment_len << s;
        Tensor ys = scale_core(qh, kh, vh, seg_len, n_k, rescalers, sched.coarsest_len, predictive);
        if (fusion_weights) {
            ys = mul_scalar_tensor(ys, slice1d(*fusion_weights, s, 1));
        }
        acc = acc.defined() ? add(acc, ys) : std::move(ys);
    }
    if (!fusion_weights && sched.num_scales > 1) {
        acc = scale(acc, 1.0 / static_cast<double>(sched.num_scales));
    }

    Tensor out = heads_unview(acc, cfg.num_heads, d);
    if (n_pad_q != n_q) {
        std::vector<std::size_t> keep(n_q);
        for (std::size_t i = 0; i < n_q; ++i) keep[i] = i;
        out = gather_rows(out, keep);
    }
    return out;
}

}  // namespace

std::size_t coarsest_segment_len(const SegmentAttentionConfig& cfg) {
    return validate_cfg(cfg).coarsest_len;
}

std::size_t coarsest_segment_count(std::size_t n, const SegmentAttentionConfig& cfg) {
    const std::size_t lc = coarsest_segment_len(cfg);
    return (n + lc - 1) / lc;
}

Tensor segment_correlation(const Tensor& q, const Tensor& k, const Tensor& v,
                           std::size_t seg_len, const Rescalers& rescalers, bool allow_padding) {
    SegmentAttentionConfig cfg;
    cfg.base_segment_len = seg_len;
    cfg.num_scales = 1;
    cfg.num_heads = 1;
    cfg.allow_padding = allow_padding;
    return run_segment_attention(q, k, v, cfg, rescalers, /*predictive=*/false, nullptr);
}

Tensor pre_segment_correlation(const Tensor& q, const Tensor& k, const Tensor& v,
                               std::size_t seg_len, const Rescalers& rescalers,
                               bool allow_padding) {
    SegmentAttentionConfig cfg;
    cfg.base_segment_len = seg_len;
    cfg.num_scales = 1;
    cfg.num_heads = 1;
    cfg.allow_padding = allow_padding;
    return run_segment_attention(q, k, v, cfg, rescalers, /*predictive=*/true, nullptr);
}

Tensor mssc(const Tensor& q, const Tensor& k, const Tensor& v, const SegmentAttentionConfig& cfg,
            const Rescalers& rescalers) {
    return run_segment_attention(q, k, v, cfg, rescalers, /*predictive=*/false, nullptr);
}

Tensor pre_mssc(const Tensor& q, const Tensor& k, const Tensor& v,
                const SegmentAttentionConfig& cfg, const Rescalers& rescalers) {
    return run_segment_attention(q, k, v, cfg, rescalers, /*predictive=*/true, nullptr);
}

MsscAttention::MsscAttention(ParamRegistry& reg, const std::string& name, std::size_t d,
                             const SegmentAttentionConfig& cfg, Rng& rng, bool predictive)
    : wq_(reg, name + ".wq", d, d, rng),
      wk_(reg, name + ".wk", d, d, rng),
      wv_(reg, name + ".wv", d, d, rng),
      wo_(reg, name + ".wo", d, d, rng, Init::Zero),
      cfg_(cfg),
      d_(d),
      predictive_(predictive) {
    validate_cfg(cfg);
    if (d % cfg.num_heads != 0) {
        throw ConfigError("MsscAttention '" + name + "': dim " + std::to_string(d) +
                          " not divisible by " + std::to_string(cfg.num_heads) + " heads");
    }
    if (cfg.learned_fusion) {
        fusion_ = &reg.add(name + ".fusion", Tensor(Shape{cfg.num_scales}));
    }
}

Tensor MsscAttention::operator()(const Tensor& x_q, const Tensor& x_kv,
                                 const Rescalers& rescalers) const {
    if (d_ == 0) throw UsageError("MsscAttention: used before construction");
    Tensor q = wq_(x_q);
    Tensor k = wk_(x_kv);
    Tensor v = wv_(x_kv);
    Tensor y;
    if (fusion_) {
        // Zero-initialized logits start as the arithmetic mean and can learn
        // any convex combination of scales.
        Tensor weights = softmax_last(*fusion_);
        y = run_segment_attention(q, k, v, cfg_, rescalers, predictive_, &weights);
    } else {
        y = run_segment_attention(q, k, v, cfg_, rescalers, predictive_, nullptr);
    }
    return wo_(y);
}

}  // namespace ttcnet
