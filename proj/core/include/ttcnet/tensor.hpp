// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "ttcnet/errors.hpp"

namespace ttcnet {

class Rng;
class Tape;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TapeState;
struct TensorAccess;
}  // namespace detail

/// Dense row-major tensor of 64-bit floats. Copying a Tensor shares the
/// underlying buffer (ops never mutate their inputs); in-place writes through
/// data() are reserved for construction and optimizer updates between steps.
///
/// A Tensor becomes differentiable by being watched on a Tape or produced by
/// an op whose inputs were; requires_grad() reports that state. Every op
/// checks its output for NaN/Inf and throws NumericError — non-finite values
/// are treated as an error state everywhere in this project.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);  // zero-filled
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor full(Shape shape, double v);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
    /// I.i.d. N(0, stddev^2) entries.
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
    /// I.i.d. U(lo, hi) entries.
    static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi);

    bool defined() const { return static_cast<bool>(values_); }
    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_ ? values_->size() : 0; }
    std::size_t dim(std::size_t axis) const;

    const double* data() const;
    double* data();
    const std::vector<double>& values() const;

    /// Value of a single-element tensor.
    double item() const;
    /// Row-major element access for tests and small utilities.
    double at(std::initializer_list<std::size_t> idx) const;

    /// True when tracked on a tape that is still open.
    bool requires_grad() const;

    /// Deep copy with its own buffer, not tracked anywhere.
    Tensor clone() const;

private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> values_;
    std::shared_ptr<detail::TapeState> tape_;
    std::int64_t node_ = -1;

    friend class Tape;
    friend struct detail::TensorAccess;
};

/// Reverse-mode gradient tape: an ordered record of the primitive ops executed
/// while it is open. Ops append themselves automatically when any input is
/// tracked here. backward() replays the record once, in reverse; a second
/// backward on the same tape is a UsageError. Not thread-safe.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Register a leaf. Returns a tracked handle sharing the same buffer.
    Tensor watch(const Tensor& t);

    /// Reverse sweep from a scalar loss produced under this tape.
    void backward(const Tensor& loss);

    /// Gradient of the last backward() w.r.t. a tensor tracked on this tape.
    /// Zeros if no gradient flowed into it.
    Tensor grad(const Tensor& t) const;

    /// Names of recorded ops, in execution order (leaves included).
    std::vector<std::string> op_trace() const;

    std::size_t size() const;
    bool backward_done() const;

private:
    std::shared_ptr<detail::TapeState> state_;
    friend struct detail::TensorAccess;
};

// ---- Primitive ops ---------------------------------------------------------
// All ops are pure: they allocate a fresh output (reshape aliases the input
// buffer) and never modify inputs. Differentiable unless noted.

// Data movement.
Tensor reshape(const Tensor& t, Shape new_shape);
Tensor permute_axes(const Tensor& t, const std::vector<std::size_t>& perm);
Tensor transpose_last2(const Tensor& t);
/// out.data[i] = t.data[idx[i]]. The index vector is shared so callers can
/// cache it; adjoint is scatter-add.
Tensor gather_flat(const Tensor& t, std::shared_ptr<const std::vector<std::size_t>> idx,
                   Shape out_shape);
/// Gather along the leading axis: out row i = t row rows[i].
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows);
/// Concatenate rank-1 tensors.
Tensor concat1d(const std::vector<Tensor>& parts);
/// Contiguous rank-1 slice [start, start+len).
Tensor slice1d(const Tensor& t, std::size_t start, std::size_t len);

// Elementwise arithmetic (same shape).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Broadcast along the last axis: a[..., d] (op) v[d].
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor sub_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_rowvec(const Tensor& a, const Tensor& v);
Tensor div_rowvec(const Tensor& a, const Tensor& v);

// Scalar broadcast.
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
/// a * s where s is a single-element (possibly tracked) tensor.
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);

// Pointwise nonlinearities.
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
/// max(a, lo); gradient passes where a > lo.
Tensor clamp_min(const Tensor& a, double lo);

// Contractions.
/// a[..., k] x b[k, n] -> [..., n]; leading axes of a are flattened.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched: a[b, m, k] x b[b, k, n] -> [b, m, n].
Tensor bmm(const Tensor& a, const Tensor& b);
/// Batched with transposed rhs: a[b, m, k] x b[b, n, k]^T -> [b, m, n].
Tensor bmm_nt(const Tensor& a, const Tensor& b);

// Reductions.
Tensor sum(const Tensor& a);   // -> shape {1}
Tensor mean(const Tensor& a);  // -> shape {1}
Tensor sum_last(const Tensor& a);
Tensor mean_last(const Tensor& a);
/// Numerically-stable softmax along the last axis (row max subtracted).
Tensor softmax_last(const Tensor& a);

/// Centered moving average along the leading axis of [n, d] with odd window k
/// and replicate padding at both ends. k must be odd, k <= 2n-1.
Tensor moving_average(const Tensor& a, std::size_t k);

}  // namespace ttcnet
