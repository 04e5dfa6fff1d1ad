// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <utility>

#include "ttcnet/rng.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

/// Owns every trainable tensor of a model, keyed by a dotted path name
/// ("temporal.enc0.attn.wq"). Layers keep pointers into the registry, so the
/// registry must outlive them; storage is a deque for address stability.
///
/// Training protocol: call watch_all(tape) at the start of a step — each slot
/// is replaced by a tracked handle on that tape (same buffer) — run the
/// forward, backward, then read tape.grad(slot) per entry. Between steps the
/// optimizer writes new values straight into the buffers.
class ParamRegistry {
public:
    using Entry = std::pair<std::string, Tensor>;

    /// Registers a tensor under a unique name and returns a stable reference.
    Tensor& add(const std::string& name, Tensor init);

    /// Re-registers every parameter as a leaf of `tape`, in place.
    void watch_all(Tape& tape);

    std::deque<Entry>& entries() { return entries_; }
    const std::deque<Entry>& entries() const { return entries_; }

    std::size_t tensor_count() const { return entries_.size(); }
    /// Total number of scalar parameters.
    std::size_t scalar_count() const;

    /// Null when absent.
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;

private:
    std::deque<Entry> entries_;
};

enum class Init {
    Xavier,  // U(-a, a), a = sqrt(6 / (fan_in + fan_out))
    Zero,    // residual-branch outputs start as exact pass-through
};

/// Affine map x[..., in] -> x W + b, parameters owned by a ParamRegistry.
class Linear {
public:
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out,
           Rng& rng, Init weight_init = Init::Xavier, double bias_init = 0.0);

    Tensor operator()(const Tensor& x) const;

    std::size_t in_dim() const { return in_; }
    std::size_t out_dim() const { return out_; }
    const Tensor& weight() const { return *w_; }
    const Tensor& bias() const { return *b_; }

private:
    const Tensor* w_ = nullptr;
    const Tensor* b_ = nullptr;
    std::size_t in_ = 0, out_ = 0;
};

/// Two-layer MLP: lin2(relu(lin1(x))). The second layer defaults to zero
/// initialization so that, used as a residual branch, the block starts as the
/// identity — this project uses no layer normalization and relies on
/// zero-initialized residual branches for stable early training.
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(ParamRegistry& reg, const std::string& name, std::size_t d_in,
                std::size_t hidden, std::size_t d_out, Rng& rng, Init out_init = Init::Zero);

    Tensor operator()(const Tensor& x) const;

private:
    Linear lin1_, lin2_;
};

/// Inverted dropout: in training mode zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate); identity in eval mode or at
/// rate 0. rate must lie in [0, 1).
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

}  // namespace ttcnet
