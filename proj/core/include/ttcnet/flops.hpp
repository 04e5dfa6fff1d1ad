// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace ttcnet::flops {

// Running op-cost counter used to verify attention complexity claims.
//
// Convention: contractions (matmul/bmm) count one unit per multiply-accumulate
// (m*k*n units for an [m x k]*[k x n] product); pointwise ops count one unit
// per output element; pure data movement (reshape/permute/gather) counts zero.
// The counter is thread_local so concurrent ablation workers don't race.

std::uint64_t count();
void reset();
void add(std::uint64_t units);

/// Measures the units spent inside a scope: Meter m; ...; m.elapsed().
class Meter {
public:
    Meter() : start_(count()) {}
    std::uint64_t elapsed() const { return count() - start_; }

private:
    std::uint64_t start_;
};

}  // namespace ttcnet::flops
