#include "ttcnet/decomposition.hpp"

namespace ttcnet {

DecompositionResult decompose(const Tensor& z, std::size_t k) {
    Tensor trend = moving_average(z, k);
    Tensor seasonality = sub(z, trend);
    return {std::move(trend), std::move(seasonality), k};
}

}  // namespace ttcnet
