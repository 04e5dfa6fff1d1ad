// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace ttcnet {

/// Deterministic 64-bit PRNG (splitmix64 core). Every stochastic choice in the
/// project — weight init, data generation, shuffling, dropout — draws from an
/// Rng seeded explicitly, so identical seeds give bit-identical runs. We avoid
/// <random> distributions on purpose: their output sequences are
/// implementation-defined, this one is pinned down to the bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform double in [0, 1), 53 random mantissa bits.
    double uniform();
    double uniform(double lo, double hi);

    /// Standard normal via polar Box-Muller (second value cached).
    double normal();

    /// Uniform index in [0, n). n must be > 0.
    std::size_t index(std::size_t n);

    /// Fisher-Yates shuffle (std::shuffle is implementation-defined).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// Derive an independent stream seed, e.g. one per video / ablation row.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ttcnet
