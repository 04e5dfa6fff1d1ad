// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/stationarity.hpp"

#include "ttcnet/errors.hpp"

namespace ttcnet {

namespace {

// Temporal mean of z[n, d] per dimension -> [d], built from primitives so the
// result stays differentiable.
Tensor temporal_mean(const Tensor& z) {
    return mean_last(transpose_last2(z));  // [d, n] -> [d]
}

}  // namespace

Rescalers identity_rescalers(std::size_t num_segments) {
    return {Tensor::scalar(1.0), Tensor(Shape{num_segments})};
}

std::pair<Tensor, SeriesStats> normalize(const Tensor& z) {
    if (z.rank() != 2) throw DimensionError("normalize: expected [n, d], got " + shape_str(z.shape()));
    if (z.dim(0) < 2) throw UsageError("normalize: need at least 2 timesteps");

    Tensor mu = temporal_mean(z);
    Tensor centered = sub_rowvec(z, mu);
    Tensor var = temporal_mean(mul(centered, centered));
    // Clamping the variance at the squared floor equals clamping sigma at the
    // floor (sqrt is monotone) and keeps the sqrt adjoint finite at zero.
    Tensor sigma = sqrt(clamp_min(var, kSigmaFloor * kSigmaFloor));
    Tensor z_prime = div_rowvec(centered, sigma);
    return {std::move(z_prime), SeriesStats{std::move(mu), std::move(sigma)}};
}

Tensor denormalize(const Tensor& z_dec, const SeriesStats& stats) {
    if (z_dec.rank() != 2) {
        throw DimensionError("denormalize: expected [n, d], got " + shape_str(z_dec.shape()));
    }
    if (stats.mu.size() != z_dec.dim(1) || stats.sigma.size() != z_dec.dim(1)) {
        throw DimensionError("denormalize: stats dimension " + std::to_string(stats.mu.size()) +
                             " vs sequence dimension " + std::to_string(z_dec.dim(1)));
    }
    return add_rowvec(mul_rowvec(z_dec, stats.sigma), stats.mu);
}

RescalerProjector::RescalerProjector(ParamRegistry& reg, const std::string& name, std::size_t d,
                                     std::size_t hidden, std::size_t num_segments, Rng& rng)
    : lin1_(reg, name + ".l1", 3 * d, hidden, rng, Init::Xavier),
      tau_head_(reg, name + ".tau", hidden, 1, rng, Init::Zero),
      delta_head_(reg, name + ".delta", hidden, num_segments, rng, Init::Zero),
      d_(d),
      num_segments_(num_segments) {
    if (num_segments == 0) throw ConfigError("RescalerProjector: zero segments");
}

Rescalers RescalerProjector::operator()(const SeriesStats& stats, const Tensor& z) const {
    if (d_ == 0) throw UsageError("RescalerProjector: used before construction");
    if (z.rank() != 2 || z.dim(1) != d_) {
        throw DimensionError("RescalerProjector: expected [n, " + std::to_string(d_) + "], got " +
                             shape_str(z.shape()));
    }
    Tensor features = concat1d({stats.mu, stats.sigma, mean_last(transpose_last2(z))});
    Tensor hidden = relu(lin1_(reshape(features, {1, 3 * d_})));
    Tensor tau = exp(reshape(tau_head_(hidden), {1}));
    Tensor delta = reshape(delta_head_(hidden), {num_segments_});
    return {std::move(tau), std::move(delta)};
}

}  // namespace ttcnet
