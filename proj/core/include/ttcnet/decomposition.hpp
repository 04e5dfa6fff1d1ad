#pragma once

#include <cstddef>

#include "ttcnet/tensor.hpp"

namespace ttcnet {

/// Additive split of an embedding sequence into a slow-moving trend and the
/// residual seasonality. trend + seasonality reconstructs the input exactly.
struct DecompositionResult {
    Tensor trend;        // moving average of the input, the long-range direction
    Tensor seasonality;  // input - trend, the short-range repetitive part
    std::size_t window;  // smoothing window used
};

/// z: [n, d]; k: odd window, k <= 2n-1. Differentiable in z.
/// k=1 gives trend == z and zero seasonality.
DecompositionResult decompose(const Tensor& z, std::size_t k);

}  // namespace ttcnet
