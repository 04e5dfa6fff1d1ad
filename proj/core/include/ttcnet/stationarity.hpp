// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "ttcnet/layers.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

/// Scale floor: standard deviations are clamped here so constant dimensions
/// normalize to zero instead of dividing by zero.
inline constexpr double kSigmaFloor = 1e-5;

/// Per-dimension temporal statistics of one embedding sequence.
struct SeriesStats {
    Tensor mu;     // [d] temporal mean
    Tensor sigma;  // [d] temporal standard deviation, >= kSigmaFloor
};

/// Learned de-stationary factors fed back into attention scoring:
/// score' = tau * score + delta_j for key segment j (at the coarsest scale).
struct Rescalers {
    Tensor tau;    // single element, > 0
    Tensor delta;  // [segments at the coarsest attention scale]
};

/// tau = 1, delta = 0: attention rescaling is the identity.
Rescalers identity_rescalers(std::size_t num_segments);

/// Standardize each dimension over time: z'[t] = (z[t] - mu) / sigma.
/// z: [n, d], n >= 2. Differentiable through both output and stats.
std::pair<Tensor, SeriesStats> normalize(const Tensor& z);

/// Inverse affine map: z[t] = z_dec[t] * sigma + mu. Exact inverse of
/// normalize wherever sigma was not clamped.
Tensor denormalize(const Tensor& z_dec, const SeriesStats& stats);

/// Two-layer perceptron mapping (mu, sigma, temporal mean of z) to the
/// rescalers. Both heads are zero-initialized, so an untrained projector
/// yields tau = exp(0) = 1 and delta = 0 — training starts at the
/// stationary-attention fixed point.
class RescalerProjector {
public:
    RescalerProjector() = default;
    RescalerProjector(ParamRegistry& reg, const std::string& name, std::size_t d,
                      std::size_t hidden, std::size_t num_segments, Rng& rng);

    /// stats/z as produced by normalize (z is the *raw* sequence, [n, d]).
    Rescalers operator()(const SeriesStats& stats, const Tensor& z) const;

    std::size_t num_segments() const { return num_segments_; }

private:
    Linear lin1_;
    Linear tau_head_;    // hidden -> 1, zero-init
    Linear delta_head_;  // hidden -> num_segments, zero-init
    std::size_t d_ = 0;
    std::size_t num_segments_ = 0;
};

}  // namespace ttcnet
