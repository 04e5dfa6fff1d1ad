// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tape_internal.hpp"
#include "ttcnet/rng.hpp"

namespace ttcnet {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)),
      values_(std::make_shared<std::vector<double>>(shape_numel(shape_), 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
    if (values.size() != shape_numel(shape_)) {
        throw DimensionError("Tensor: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape_));
    }
    values_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : *t.values_) x = v;
    return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (double& x : *t.values_) x = stddev * rng.normal();
    return t;
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& x : *t.values_) x = rng.uniform(lo, hi);
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("Tensor::dim: axis " + std::to_string(axis) +
                             " out of range for " + shape_str(shape_));
    }
    return shape_[axis];
}

const double* Tensor::data() const {
    if (!values_) throw UsageError("Tensor::data on undefined tensor");
    return values_->data();
}

double* Tensor::data() {
    if (!values_) throw UsageError("Tensor::data on undefined tensor");
    return values_->data();
}

const std::vector<double>& Tensor::values() const {
    if (!values_) throw UsageError("Tensor::values on undefined tensor");
    return *values_;
}

double Tensor::item() const {
    if (size() != 1) {
        throw UsageError("Tensor::item on tensor of shape " + shape_str(shape_));
    }
    return (*values_)[0];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
        throw DimensionError("Tensor::at: " + std::to_string(idx.size()) +
                             " indices for " + shape_str(shape_));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
        if (i >= shape_[axis]) {
            throw DimensionError("Tensor::at: index out of range on axis " +
                                 std::to_string(axis));
        }
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return (*values_)[flat];
}

bool Tensor::requires_grad() const { return tape_ && tape_->open && node_ >= 0; }

Tensor Tensor::clone() const {
    if (!values_) return Tensor();
    return Tensor(shape_, *values_);
}

// ---- TapeState -------------------------------------------------------------

namespace detail {

void TapeState::accumulate(std::int64_t node, const double* g, std::size_t n) {
    auto& buf = grads[static_cast<std::size_t>(node)];
    if (!buf) buf = std::make_unique<std::vector<double>>(n, 0.0);
    double* dst = buf->data();
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

std::shared_ptr<TapeState> TensorAccess::merge(std::initializer_list<const Tensor*> inputs) {
    std::shared_ptr<TapeState> found;
    for (const Tensor* t : inputs) {
        auto s = t->tape_;
        if (s && s->open && t->node_ >= 0) {
            if (found && found != s) {
                throw UsageError("op inputs are tracked on two different open tapes");
            }
            found = s;
        }
    }
    return found;
}

void TensorAccess::record(Tensor& out, const char* op, const std::shared_ptr<TapeState>& tape,
                          std::function<void(TapeState&, const std::vector<double>&)> bw) {
    out.tape_ = tape;
    out.node_ = tape->add_node({op, out.shape_, std::move(bw), false});
}

Tensor TensorAccess::alias(const Tensor& t, Shape new_shape) {
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.values_ = t.values_;
    return out;
}

void check_finite(const double* data, std::size_t n, const char* op) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i])) {
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

}  // namespace detail

// ---- Tape ------------------------------------------------------------------

Tape::Tape() : state_(std::make_shared<detail::TapeState>()) {}

Tape::~Tape() { state_->open = false; }

Tensor Tape::watch(const Tensor& t) {
    if (!t.defined()) throw UsageError("Tape::watch on undefined tensor");
    if (t.tape_ == state_ && t.node_ >= 0) return t;  // already a leaf here
    if (t.tape_ && t.tape_->open && t.tape_ != state_) {
        throw UsageError("Tape::watch: tensor is tracked on another open tape");
    }
    Tensor out = t;  // shares the buffer
    out.tape_ = state_;
    out.node_ = state_->add_node({"leaf", t.shape(), nullptr, true});
    return out;
}

void Tape::backward(const Tensor& loss) {
    auto& st = *state_;
    if (loss.tape_ != state_ || loss.node_ < 0) {
        throw UsageError("Tape::backward: loss was not produced under this tape");
    }
    if (loss.size() != 1) {
        throw UsageError("Tape::backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    if (st.backward_done) {
        throw UsageError("Tape::backward called twice on the same tape");
    }
    st.backward_done = true;

    st.grads[static_cast<std::size_t>(loss.node_)] =
        std::make_unique<std::vector<double>>(1, 1.0);

    for (std::int64_t i = static_cast<std::int64_t>(st.nodes.size()) - 1; i >= 0; --i) {
        auto& g = st.grads[static_cast<std::size_t>(i)];
        if (!g) continue;
        auto& node = st.nodes[static_cast<std::size_t>(i)];
        if (node.backward) node.backward(st, *g);
        // Intermediate gradients are dead once propagated; keep leaves for grad().
        if (!node.is_leaf) g.reset();
    }
}

Tensor Tape::grad(const Tensor& t) const {
    if (t.tape_ != state_ || t.node_ < 0) {
        throw UsageError("Tape::grad: tensor is not tracked on this tape");
    }
    if (!state_->backward_done) {
        throw UsageError("Tape::grad before backward");
    }
    const auto& g = state_->grads[static_cast<std::size_t>(t.node_)];
    if (!g) return Tensor(t.shape());
    return Tensor(t.shape(), *g);
}

std::vector<std::string> Tape::op_trace() const {
    std::vector<std::string> out;
    out.reserve(state_->nodes.size());
    for (const auto& n : state_->nodes) out.emplace_back(n.op);
    return out;
}

std::size_t Tape::size() const { return state_->nodes.size(); }

bool Tape::backward_done() const { return state_->backward_done; }

}  // namespace ttcnet
