// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used to check library results. Everything here is
// written in the most direct way possible (triple loops, literal formulas) and
// shares no code with the library under test.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ttcnet/tensor.hpp"

namespace oracle {

// c[m,n] = a[m,k] * b[k,n], triple loop.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t p = 0; p < k; ++p)
                c[i * n + j] += a[i * k + p] * b[p * n + j];
    return c;
}

// Softmax of one row, computed literally: exp(x_i) / sum_j exp(x_j) after
// shifting by the max for stability.
inline std::vector<double> softmax_row(const std::vector<double>& x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    std::vector<double> y(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx);
        s += y[i];
    }
    for (double& v : y) v /= s;
    return y;
}

// Centered moving average over rows of x[n,d] with odd window k and replicate
// padding at both ends, computed per output element.
inline std::vector<double> windowed_mean(const std::vector<double>& x, std::size_t n,
                                         std::size_t d, std::size_t k) {
    std::vector<double> y(n * d, 0.0);
    const long h = static_cast<long>(k) / 2;
    for (long t = 0; t < static_cast<long>(n); ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (long o = -h; o <= h; ++o) {
                long src = t + o;
                if (src < 0) src = 0;
                if (src >= static_cast<long>(n)) src = static_cast<long>(n) - 1;
                s += x[static_cast<std::size_t>(src) * d + j];
            }
            y[static_cast<std::size_t>(t) * d + j] = s / static_cast<double>(k);
        }
    }
    return y;
}

// ---- Finite-difference gradient checking -----------------------------------

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_elem = 0;
    std::size_t checked = 0;
};

// Builds the loss once under a tape to get analytic gradients, then perturbs
// every element of every input by +/-eps and compares against the central
// difference. `make_loss` must construct a fresh graph from the tensors it is
// given and return a scalar.
//
// Relative error uses max(1, |g|, |fd|) in the denominator so tiny gradients
// are compared absolutely.
inline GradCheck check_gradients(
    const std::function<ttcnet::Tensor(const std::vector<ttcnet::Tensor>&)>& make_loss,
    std::vector<ttcnet::Tensor>& inputs, double eps = 1e-5) {
    using ttcnet::Tape;
    using ttcnet::Tensor;

    std::vector<std::vector<double>> grads;
    {
        Tape tape;
        std::vector<Tensor> tracked;
        tracked.reserve(inputs.size());
        for (auto& t : inputs) tracked.push_back(tape.watch(t));
        Tensor loss = make_loss(tracked);
        tape.backward(loss);
        for (auto& t : tracked) {
            Tensor g = tape.grad(t);
            grads.emplace_back(g.data(), g.data() + g.size());
        }
    }

    GradCheck result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        double* data = inputs[i].data();
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double orig = data[j];
            data[j] = orig + eps;
            const double lp = make_loss(inputs).item();
            data[j] = orig - eps;
            const double lm = make_loss(inputs).item();
            data[j] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double g = grads[i][j];
            const double denom = std::max({1.0, std::abs(g), std::abs(fd)});
            const double rel = std::abs(g - fd) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_input = i;
                result.worst_elem = j;
            }
            ++result.checked;
        }
    }
    return result;
}

}  // namespace oracle
