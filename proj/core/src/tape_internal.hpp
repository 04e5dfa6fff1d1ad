// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared internals between tensor.cpp (Tensor/Tape) and ops.cpp (primitives).
// Not installed.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ttcnet/tensor.hpp"

namespace ttcnet::detail {

// A forward value saved for use in a backward closure. Deliberately NOT a
// Tensor: closures live inside TapeState, and a captured Tensor would hold a
// shared_ptr back to the same TapeState, leaking the whole tape.
struct Saved {
    std::shared_ptr<const std::vector<double>> vals;
    Shape shape;

    const double* data() const { return vals->data(); }
    std::size_t size() const { return vals->size(); }
};

struct TapeState {
    struct Node {
        const char* op;
        Shape shape;  // output shape
        // Consumes the output gradient; accumulates into input node buffers.
        std::function<void(TapeState&, const std::vector<double>&)> backward;
        bool is_leaf = false;
    };

    bool open = true;
    bool backward_done = false;
    std::vector<Node> nodes;
    // Lazily allocated gradient buffers, parallel to nodes.
    std::vector<std::unique_ptr<std::vector<double>>> grads;

    std::int64_t add_node(Node n) {
        nodes.push_back(std::move(n));
        grads.emplace_back(nullptr);
        return static_cast<std::int64_t>(nodes.size()) - 1;
    }

    void accumulate(std::int64_t node, const double* g, std::size_t n);
};

struct TensorAccess {
    static std::shared_ptr<TapeState> tape(const Tensor& t) { return t.tape_; }
    static std::int64_t node(const Tensor& t) { return t.node_; }
    static Saved saved(const Tensor& t) { return Saved{t.values_, t.shape_}; }
    static std::shared_ptr<const std::vector<double>> buffer(const Tensor& t) {
        return t.values_;
    }

    /// Open tape shared by the inputs, if any. Throws UsageError when inputs
    /// are tracked on two different open tapes.
    static std::shared_ptr<TapeState> merge(std::initializer_list<const Tensor*> inputs);

    /// Attach `out` to `tape` as the product of `op`, with backward `bw`.
    static void record(Tensor& out, const char* op, const std::shared_ptr<TapeState>& tape,
                       std::function<void(TapeState&, const std::vector<double>&)> bw);

    /// Node id of t on `tape`, or -1 when untracked there.
    static std::int64_t node_on(const Tensor& t, const std::shared_ptr<TapeState>& tape) {
        return (t.tape_ == tape) ? t.node_ : -1;
    }

    /// Build a tensor aliasing an existing buffer (used by reshape).
    static Tensor alias(const Tensor& t, Shape new_shape);
};

/// Throws NumericError if any value is non-finite.
void check_finite(const double* data, std::size_t n, const char* op);

}  // namespace ttcnet::detail
