// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Primitive tensor ops: forward kernels plus their reverse-mode adjoints.
// Dense contractions are delegated to Eigen; everything else is plain loops.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "tape_internal.hpp"
#include "ttcnet/flops.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

namespace {

using detail::Saved;
using detail::TapeState;
using detail::TensorAccess;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw UsageError(std::string(op) + ": undefined tensor");
}

std::size_t last_dim(const Tensor& t, const char* op) {
    if (t.rank() == 0) throw DimensionError(std::string(op) + ": rank-0 tensor");
    return t.shape().back();
}

Shape drop_last(const Shape& s) {
    Shape out(s.begin(), s.end() - 1);
    if (out.empty()) out = {1};
    return out;
}

// Shorthand for the record-if-tracked epilogue every op shares.
template <typename Backward>
Tensor finish(Tensor out, const char* op, std::initializer_list<const Tensor*> inputs,
              Backward&& make_backward) {
    detail::check_finite(out.data(), out.size(), op);
    if (auto tape = TensorAccess::merge(inputs)) {
        TensorAccess::record(out, op, tape, make_backward(tape));
    }
    return out;
}

std::vector<std::size_t> strides_of(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

// out[i...] = in[perm(i)...]; plain odometer walk over the output.
void permute_raw(const double* in, const Shape& in_shape,
                 const std::vector<std::size_t>& perm, double* out) {
    const std::size_t r = in_shape.size();
    const auto in_strides = strides_of(in_shape);
    Shape out_shape(r);
    std::vector<std::size_t> step(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in_shape[perm[i]];
        step[i] = in_strides[perm[i]];
    }
    const std::size_t n = shape_numel(in_shape);
    std::vector<std::size_t> ctr(r, 0);
    std::size_t src = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
        out[pos] = in[src];
        for (std::size_t axis = r; axis-- > 0;) {
            if (++ctr[axis] < out_shape[axis]) {
                src += step[axis];
                break;
            }
            ctr[axis] = 0;
            src -= step[axis] * (out_shape[axis] - 1);
        }
    }
}

std::vector<std::size_t> inverse_perm(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return inv;
}

}  // namespace

// ---- Data movement ---------------------------------------------------------

Tensor reshape(const Tensor& t, Shape new_shape) {
    require_defined(t, "reshape");
    if (shape_numel(new_shape) != t.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(t.shape()) + " as " +
                             shape_str(new_shape));
    }
    Tensor out = TensorAccess::alias(t, std::move(new_shape));
    if (auto tape = TensorAccess::merge({&t})) {
        const auto nt = TensorAccess::node_on(t, tape);
        TensorAccess::record(out, "reshape", tape,
                             [nt](TapeState& ts, const std::vector<double>& g) {
                                 ts.accumulate(nt, g.data(), g.size());
                             });
    }
    return out;
}

Tensor permute_axes(const Tensor& t, const std::vector<std::size_t>& perm) {
    require_defined(t, "permute");
    const std::size_t r = t.rank();
    if (perm.size() != r) throw DimensionError("permute: perm rank mismatch");
    std::vector<bool> seen(r, false);
    for (std::size_t p : perm) {
        if (p >= r || seen[p]) throw DimensionError("permute: invalid permutation");
        seen[p] = true;
    }
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = t.dim(perm[i]);
    Tensor out(out_shape);
    permute_raw(t.data(), t.shape(), perm, out.data());

    return finish(std::move(out), "permute", {&t}, [&](const auto& tape) {
        const auto nt = TensorAccess::node_on(t, tape);
        const Shape grad_shape = out_shape;
        const auto inv = inverse_perm(perm);
        return [nt, grad_shape, inv](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> gin(g.size());
            permute_raw(g.data(), grad_shape, inv, gin.data());
            ts.accumulate(nt, gin.data(), gin.size());
        };
    });
}

Tensor transpose_last2(const Tensor& t) {
    const std::size_t r = t.rank();
    if (r < 2) throw DimensionError("transpose: rank must be >= 2");
    std::vector<std::size_t> perm(r);
    for (std::size_t i = 0; i < r; ++i) perm[i] = i;
    std::swap(perm[r - 1], perm[r - 2]);
    return permute_axes(t, perm);
}

Tensor gather_flat(const Tensor& t, std::shared_ptr<const std::vector<std::size_t>> idx,
                   Shape out_shape) {
    require_defined(t, "gather");
    if (!idx) throw UsageError("gather: null index vector");
    if (idx->size() != shape_numel(out_shape)) {
        throw DimensionError("gather: index count does not match output shape");
    }
    const std::size_t in_n = t.size();
    Tensor out(std::move(out_shape));
    const double* src = t.data();
    double* dst = out.data();
    const auto& ix = *idx;
    for (std::size_t i = 0; i < ix.size(); ++i) {
        if (ix[i] >= in_n) throw DimensionError("gather: index out of range");
        dst[i] = src[ix[i]];
    }

    return finish(std::move(out), "gather", {&t}, [&](const auto& tape) {
        const auto nt = TensorAccess::node_on(t, tape);
        return [nt, idx, in_n](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> gin(in_n, 0.0);
            const auto& ix = *idx;
            for (std::size_t i = 0; i < ix.size(); ++i) gin[ix[i]] += g[i];
            ts.accumulate(nt, gin.data(), gin.size());
        };
    });
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
    require_defined(t, "gather_rows");
    if (t.rank() < 1) throw DimensionError("gather_rows: rank must be >= 1");
    const std::size_t n_rows = t.dim(0);
    const std::size_t stride = t.size() / std::max<std::size_t>(n_rows, 1);
    Shape out_shape = t.shape();
    out_shape[0] = rows.size();
    Tensor out(out_shape);
    const double* src = t.data();
    double* dst = out.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n_rows) throw DimensionError("gather_rows: row index out of range");
        std::memcpy(dst + i * stride, src + rows[i] * stride, stride * sizeof(double));
    }

    return finish(std::move(out), "gather_rows", {&t}, [&](const auto& tape) {
        const auto nt = TensorAccess::node_on(t, tape);
        const std::vector<std::size_t> rows_copy = rows;
        const std::size_t in_n = t.size();
        return [nt, rows_copy, stride, in_n](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> gin(in_n, 0.0);
            for (std::size_t i = 0; i < rows_copy.size(); ++i) {
                const double* gs = g.data() + i * stride;
                double* gd = gin.data() + rows_copy[i] * stride;
                for (std::size_t j = 0; j < stride; ++j) gd[j] += gs[j];
            }
            ts.accumulate(nt, gin.data(), gin.size());
        };
    });
}

Tensor concat1d(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat1d: no parts");
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_defined(p, "concat1d");
        if (p.rank() != 1) throw DimensionError("concat1d: all parts must be rank-1");
        total += p.size();
    }
    Tensor out(Shape{total});
    double* dst = out.data();
    for (const auto& p : parts) {
        std::memcpy(dst, p.data(), p.size() * sizeof(double));
        dst += p.size();
    }

    detail::check_finite(out.data(), out.size(), "concat1d");
    std::shared_ptr<TapeState> tape;
    for (const auto& p : parts) {
        auto t = TensorAccess::merge({&p});
        if (t) {
            if (tape && tape != t) throw UsageError("concat1d: inputs on different open tapes");
            tape = t;
        }
    }
    if (tape) {
        struct Piece {
            std::int64_t node;
            std::size_t offset, len;
        };
        std::vector<Piece> pieces;
        std::size_t off = 0;
        for (const auto& p : parts) {
            pieces.push_back({TensorAccess::node_on(p, tape), off, p.size()});
            off += p.size();
        }
        TensorAccess::record(out, "concat1d", tape,
                             [pieces](TapeState& ts, const std::vector<double>& g) {
                                 for (const auto& pc : pieces) {
                                     if (pc.node >= 0) {
                                         ts.accumulate(pc.node, g.data() + pc.offset, pc.len);
                                     }
                                 }
                             });
    }
    return out;
}

Tensor slice1d(const Tensor& t, std::size_t start, std::size_t len) {
    require_defined(t, "slice1d");
    if (t.rank() != 1) throw DimensionError("slice1d: rank must be 1");
    if (start + len > t.size()) throw DimensionError("slice1d: range out of bounds");
    Tensor out(Shape{len});
    std::memcpy(out.data(), t.data() + start, len * sizeof(double));

    return finish(std::move(out), "slice1d", {&t}, [&](const auto& tape) {
        const auto nt = TensorAccess::node_on(t, tape);
        const std::size_t in_n = t.size();
        return [nt, start, len, in_n](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> gin(in_n, 0.0);
            std::memcpy(gin.data() + start, g.data(), len * sizeof(double));
            ts.accumulate(nt, gin.data(), gin.size());
        };
    });
}

// ---- Elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    require_defined(a, name);
    require_defined(b, name);
    require_same_shape(a, b, name);
    const std::size_t n = a.size();
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
    flops::add(n);

    return finish(std::move(out), name, {&a, &b}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const auto nb = TensorAccess::node_on(b, tape);
        const Saved sa = TensorAccess::saved(a);
        const Saved sb = TensorAccess::saved(b);
        return [na, nb, sa, sb, bwd](TapeState& ts, const std::vector<double>& g) {
            bwd(ts, g, na, nb, sa, sb);
        };
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](TapeState& ts, const std::vector<double>& g, std::int64_t na, std::int64_t nb,
           const Saved&, const Saved&) {
            if (na >= 0) ts.accumulate(na, g.data(), g.size());
            if (nb >= 0) ts.accumulate(nb, g.data(), g.size());
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](TapeState& ts, const std::vector<double>& g, std::int64_t na, std::int64_t nb,
           const Saved&, const Saved&) {
            if (na >= 0) ts.accumulate(na, g.data(), g.size());
            if (nb >= 0) {
                std::vector<double> neg(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
                ts.accumulate(nb, neg.data(), neg.size());
            }
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](TapeState& ts, const std::vector<double>& g, std::int64_t na, std::int64_t nb,
           const Saved& sa, const Saved& sb) {
            std::vector<double> buf(g.size());
            if (na >= 0) {
                for (std::size_t i = 0; i < g.size(); ++i) buf[i] = g[i] * sb.data()[i];
                ts.accumulate(na, buf.data(), buf.size());
            }
            if (nb >= 0) {
                for (std::size_t i = 0; i < g.size(); ++i) buf[i] = g[i] * sa.data()[i];
                ts.accumulate(nb, buf.data(), buf.size());
            }
        });
}

// ---- Rowvec broadcasts -----------------------------------------------------

namespace {

enum class RowOp { Add, Sub, Mul, Div };

Tensor rowvec_op(const Tensor& a, const Tensor& v, RowOp kind, const char* name) {
    require_defined(a, name);
    require_defined(v, name);
    if (v.rank() != 1) throw DimensionError(std::string(name) + ": v must be rank-1");
    const std::size_t d = last_dim(a, name);
    if (v.size() != d) {
        throw DimensionError(std::string(name) + ": v size " + std::to_string(v.size()) +
                             " vs last axis " + std::to_string(d));
    }
    const std::size_t rows = a.size() / d;
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pv = v.data();
    double* po = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = pa + r * d;
        double* orow = po + r * d;
        switch (kind) {
            case RowOp::Add:
                for (std::size_t j = 0; j < d; ++j) orow[j] = ar[j] + pv[j];
                break;
            case RowOp::Sub:
                for (std::size_t j = 0; j < d; ++j) orow[j] = ar[j] - pv[j];
                break;
            case RowOp::Mul:
                for (std::size_t j = 0; j < d; ++j) orow[j] = ar[j] * pv[j];
                break;
            case RowOp::Div:
                for (std::size_t j = 0; j < d; ++j) orow[j] = ar[j] / pv[j];
                break;
        }
    }
    flops::add(a.size());

    return finish(std::move(out), name, {&a, &v}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const auto nv = TensorAccess::node_on(v, tape);
        const Saved sa = TensorAccess::saved(a);
        const Saved sv = TensorAccess::saved(v);
        return [na, nv, sa, sv, kind, rows, d](TapeState& ts, const std::vector<double>& g) {
            if (na >= 0) {
                if (kind == RowOp::Add || kind == RowOp::Sub) {
                    ts.accumulate(na, g.data(), g.size());
                } else {
                    std::vector<double> ga(g.size());
                    for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t j = 0; j < d; ++j) {
                            const double vj = sv.data()[j];
                            ga[r * d + j] =
                                (kind == RowOp::Mul) ? g[r * d + j] * vj : g[r * d + j] / vj;
                        }
                    }
                    ts.accumulate(na, ga.data(), ga.size());
                }
            }
            if (nv >= 0) {
                std::vector<double> gv(d, 0.0);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gij = g[r * d + j];
                        switch (kind) {
                            case RowOp::Add:
                                gv[j] += gij;
                                break;
                            case RowOp::Sub:
                                gv[j] -= gij;
                                break;
                            case RowOp::Mul:
                                gv[j] += gij * sa.data()[r * d + j];
                                break;
                            case RowOp::Div: {
                                const double vj = sv.data()[j];
                                gv[j] -= gij * sa.data()[r * d + j] / (vj * vj);
                                break;
                            }
                        }
                    }
                }
                ts.accumulate(nv, gv.data(), gv.size());
            }
        };
    });
}

}  // namespace

Tensor add_rowvec(const Tensor& a, const Tensor& v) { return rowvec_op(a, v, RowOp::Add, "add_rowvec"); }
Tensor sub_rowvec(const Tensor& a, const Tensor& v) { return rowvec_op(a, v, RowOp::Sub, "sub_rowvec"); }
Tensor mul_rowvec(const Tensor& a, const Tensor& v) { return rowvec_op(a, v, RowOp::Mul, "mul_rowvec"); }
Tensor div_rowvec(const Tensor& a, const Tensor& v) { return rowvec_op(a, v, RowOp::Div, "div_rowvec"); }

// ---- Scalar broadcast ------------------------------------------------------

Tensor scale(const Tensor& a, double c) {
    require_defined(a, "scale");
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] * c;
    flops::add(a.size());

    return finish(std::move(out), "scale", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        return [na, c](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * c;
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    require_defined(a, "add_scalar");
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] + c;
    flops::add(a.size());

    return finish(std::move(out), "add_scalar", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        return [na](TapeState& ts, const std::vector<double>& g) {
            ts.accumulate(na, g.data(), g.size());
        };
    });
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
    require_defined(a, "mul_scalar_tensor");
    require_defined(s, "mul_scalar_tensor");
    if (s.size() != 1) throw DimensionError("mul_scalar_tensor: s must have one element");
    const double sv = s.data()[0];
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] * sv;
    flops::add(a.size());

    return finish(std::move(out), "mul_scalar_tensor", {&a, &s}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const auto ns = TensorAccess::node_on(s, tape);
        const Saved sa = TensorAccess::saved(a);
        return [na, ns, sa, sv](TapeState& ts, const std::vector<double>& g) {
            if (na >= 0) {
                std::vector<double> ga(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * sv;
                ts.accumulate(na, ga.data(), ga.size());
            }
            if (ns >= 0) {
                double gs = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) gs += g[i] * sa.data()[i];
                ts.accumulate(ns, &gs, 1);
            }
        };
    });
}

// ---- Pointwise nonlinearities ----------------------------------------------

Tensor relu(const Tensor& a) {
    require_defined(a, "relu");
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
    flops::add(a.size());

    return finish(std::move(out), "relu", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const Saved sa = TensorAccess::saved(a);
        return [na, sa](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(g.size());
            // Subgradient 0 at the kink.
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] = sa.data()[i] > 0.0 ? g[i] : 0.0;
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

Tensor exp(const Tensor& a) {
    require_defined(a, "exp");
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = std::exp(pa[i]);
    flops::add(a.size());

    // Passed by copy: the backward closure saves the output buffer.
    return finish(out, "exp", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const Saved so = TensorAccess::saved(out);
        return [na, so](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * so.data()[i];
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

Tensor sqrt(const Tensor& a) {
    require_defined(a, "sqrt");
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = std::sqrt(pa[i]);
    flops::add(a.size());

    return finish(out, "sqrt", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const Saved so = TensorAccess::saved(out);
        return [na, so](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / (2.0 * so.data()[i]);
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

Tensor clamp_min(const Tensor& a, double lo) {
    require_defined(a, "clamp_min");
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] > lo ? pa[i] : lo;
    flops::add(a.size());

    return finish(std::move(out), "clamp_min", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const Saved sa = TensorAccess::saved(a);
        return [na, sa, lo](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] = sa.data()[i] > lo ? g[i] : 0.0;
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

// ---- Contractions ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (b.rank() != 2) throw DimensionError("matmul: rhs must be rank-2");
    const std::size_t k = last_dim(a, "matmul");
    if (k != b.dim(0)) {
        throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::size_t n = b.dim(1);
    const std::size_t m = a.size() / k;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    Tensor out(out_shape);

    CMap ma(a.data(), m, k);
    CMap mb(b.data(), k, n);
    Map mo(out.data(), m, n);
    mo.noalias() = ma * mb;
    flops::add(static_cast<std::uint64_t>(m) * k * n);

    return finish(std::move(out), "matmul", {&a, &b}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const auto nb = TensorAccess::node_on(b, tape);
        const Saved sa = TensorAccess::saved(a);
        const Saved sb = TensorAccess::saved(b);
        return [na, nb, sa, sb, m, k, n](TapeState& ts, const std::vector<double>& g) {
            CMap mg(g.data(), m, n);
            if (na >= 0) {
                std::vector<double> ga(m * k);
                Map mga(ga.data(), m, k);
                CMap mb2(sb.data(), k, n);
                mga.noalias() = mg * mb2.transpose();
                flops::add(static_cast<std::uint64_t>(m) * k * n);
                ts.accumulate(na, ga.data(), ga.size());
            }
            if (nb >= 0) {
                std::vector<double> gb(k * n);
                Map mgb(gb.data(), k, n);
                CMap ma2(sa.data(), m, k);
                mgb.noalias() = ma2.transpose() * mg;
                flops::add(static_cast<std::uint64_t>(m) * k * n);
                ts.accumulate(nb, gb.data(), gb.size());
            }
        };
    });
}

namespace {

void require_bmm_shapes(const Tensor& a, const Tensor& b, bool rhs_transposed, const char* op,
                        std::size_t& bt, std::size_t& m, std::size_t& k, std::size_t& n) {
    require_defined(a, op);
    require_defined(b, op);
    if (a.rank() != 3 || b.rank() != 3) {
        throw DimensionError(std::string(op) + ": both operands must be rank-3");
    }
    bt = a.dim(0);
    m = a.dim(1);
    k = a.dim(2);
    if (b.dim(0) != bt) throw DimensionError(std::string(op) + ": batch mismatch");
    if (!rhs_transposed) {
        if (b.dim(1) != k) throw DimensionError(std::string(op) + ": inner dim mismatch");
        n = b.dim(2);
    } else {
        if (b.dim(2) != k) throw DimensionError(std::string(op) + ": inner dim mismatch");
        n = b.dim(1);
    }
}

}  // namespace

Tensor bmm(const Tensor& a, const Tensor& b) {
    std::size_t bt, m, k, n;
    require_bmm_shapes(a, b, false, "bmm", bt, m, k, n);
    Tensor out(Shape{bt, m, n});
    for (std::size_t i = 0; i < bt; ++i) {
        CMap ma(a.data() + i * m * k, m, k);
        CMap mb(b.data() + i * k * n, k, n);
        Map mo(out.data() + i * m * n, m, n);
        mo.noalias() = ma * mb;
    }
    flops::add(static_cast<std::uint64_t>(bt) * m * k * n);

    return finish(std::move(out), "bmm", {&a, &b}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const auto nb = TensorAccess::node_on(b, tape);
        const Saved sa = TensorAccess::saved(a);
        const Saved sb = TensorAccess::saved(b);
        return [na, nb, sa, sb, bt, m, k, n](TapeState& ts, const std::vector<double>& g) {
            if (na >= 0) {
                std::vector<double> ga(bt * m * k);
                for (std::size_t i = 0; i < bt; ++i) {
                    CMap mg(g.data() + i * m * n, m, n);
                    CMap mb2(sb.data() + i * k * n, k, n);
                    Map mga(ga.data() + i * m * k, m, k);
                    mga.noalias() = mg * mb2.transpose();
                }
                flops::add(static_cast<std::uint64_t>(bt) * m * k * n);
                ts.accumulate(na, ga.data(), ga.size());
            }
            if (nb >= 0) {
                std::vector<double> gb(bt * k * n);
                for (std::size_t i = 0; i < bt; ++i) {
                    CMap mg(g.data() + i * m * n, m, n);
                    CMap ma2(sa.data() + i * m * k, m, k);
                    Map mgb(gb.data() + i * k * n, k, n);
                    mgb.noalias() = ma2.transpose() * mg;
                }
                flops::add(static_cast<std::uint64_t>(bt) * m * k * n);
                ts.accumulate(nb, gb.data(), gb.size());
            }
        };
    });
}

Tensor bmm_nt(const Tensor& a, const Tensor& b) {
    std::size_t bt, m, k, n;
    require_bmm_shapes(a, b, true, "bmm_nt", bt, m, k, n);
    Tensor out(Shape{bt, m, n});
    for (std::size_t i = 0; i < bt; ++i) {
        CMap ma(a.data() + i * m * k, m, k);
        CMap mb(b.data() + i * n * k, n, k);
        Map mo(out.data() + i * m * n, m, n);
        mo.noalias() = ma * mb.transpose();
    }
    flops::add(static_cast<std::uint64_t>(bt) * m * k * n);

    return finish(std::move(out), "bmm_nt", {&a, &b}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const auto nb = TensorAccess::node_on(b, tape);
        const Saved sa = TensorAccess::saved(a);
        const Saved sb = TensorAccess::saved(b);
        return [na, nb, sa, sb, bt, m, k, n](TapeState& ts, const std::vector<double>& g) {
            if (na >= 0) {
                std::vector<double> ga(bt * m * k);
                for (std::size_t i = 0; i < bt; ++i) {
                    CMap mg(g.data() + i * m * n, m, n);
                    CMap mb2(sb.data() + i * n * k, n, k);
                    Map mga(ga.data() + i * m * k, m, k);
                    mga.noalias() = mg * mb2;
                }
                flops::add(static_cast<std::uint64_t>(bt) * m * k * n);
                ts.accumulate(na, ga.data(), ga.size());
            }
            if (nb >= 0) {
                std::vector<double> gb(bt * n * k);
                for (std::size_t i = 0; i < bt; ++i) {
                    CMap mg(g.data() + i * m * n, m, n);
                    CMap ma2(sa.data() + i * m * k, m, k);
                    Map mgb(gb.data() + i * n * k, n, k);
                    mgb.noalias() = mg.transpose() * ma2;
                }
                flops::add(static_cast<std::uint64_t>(bt) * m * k * n);
                ts.accumulate(nb, gb.data(), gb.size());
            }
        };
    });
}

// ---- Reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double s = 0.0;
    const double* pa = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += pa[i];
    flops::add(a.size());
    Tensor out = Tensor::scalar(s);

    return finish(std::move(out), "sum", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const std::size_t n = a.size();
        return [na, n](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(n, g[0]);
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

Tensor mean(const Tensor& a) {
    require_defined(a, "mean");
    if (a.size() == 0) throw DimensionError("mean: empty tensor");
    double s = 0.0;
    const double* pa = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += pa[i];
    flops::add(a.size());
    Tensor out = Tensor::scalar(s / static_cast<double>(a.size()));

    return finish(std::move(out), "mean", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const std::size_t n = a.size();
        return [na, n](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(n, g[0] / static_cast<double>(n));
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

namespace {

Tensor reduce_last(const Tensor& a, bool take_mean, const char* name) {
    require_defined(a, name);
    const std::size_t m = last_dim(a, name);
    if (m == 0) throw DimensionError(std::string(name) + ": empty last axis");
    const std::size_t rows = a.size() / m;
    Tensor out(drop_last(a.shape()));
    const double* pa = a.data();
    double* po = out.data();
    const double denom = take_mean ? static_cast<double>(m) : 1.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += pa[r * m + j];
        po[r] = s / denom;
    }
    flops::add(a.size());

    return finish(std::move(out), name, {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        return [na, rows, m, denom](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(rows * m);
            for (std::size_t r = 0; r < rows; ++r) {
                const double gr = g[r] / denom;
                for (std::size_t j = 0; j < m; ++j) ga[r * m + j] = gr;
            }
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

}  // namespace

Tensor sum_last(const Tensor& a) { return reduce_last(a, false, "sum_last"); }
Tensor mean_last(const Tensor& a) { return reduce_last(a, true, "mean_last"); }

Tensor softmax_last(const Tensor& a) {
    require_defined(a, "softmax");
    const std::size_t m = last_dim(a, "softmax");
    if (m == 0) throw DimensionError("softmax: empty last axis");
    const std::size_t rows = a.size() / m;
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = pa + r * m;
        double* orow = po + r * m;
        double mx = ar[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, ar[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            orow[j] = std::exp(ar[j] - mx);
            s += orow[j];
        }
        const double inv = 1.0 / s;
        for (std::size_t j = 0; j < m; ++j) orow[j] *= inv;
    }
    flops::add(4 * a.size());

    return finish(out, "softmax", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        const Saved so = TensorAccess::saved(out);
        return [na, so, rows, m](TapeState& ts, const std::vector<double>& g) {
            std::vector<double> ga(rows * m);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = so.data() + r * m;
                const double* gr = g.data() + r * m;
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) dot += gr[j] * y[j];
                for (std::size_t j = 0; j < m; ++j) ga[r * m + j] = y[j] * (gr[j] - dot);
            }
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

// ---- Moving average --------------------------------------------------------

Tensor moving_average(const Tensor& a, std::size_t k) {
    require_defined(a, "moving_average");
    if (a.rank() != 2) {
        throw DimensionError("moving_average: expected [n, d], got " + shape_str(a.shape()));
    }
    const std::size_t n = a.dim(0);
    const std::size_t d = a.dim(1);
    if (n == 0) throw DimensionError("moving_average: empty sequence");
    if (k == 0 || k % 2 == 0) {
        throw ConfigError("moving_average: window must be odd and positive, got " +
                          std::to_string(k));
    }
    if (k > 2 * n - 1) {
        throw ConfigError("moving_average: window " + std::to_string(k) +
                          " exceeds 2n-1 for n=" + std::to_string(n));
    }
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(k) / 2;
    const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::ptrdiff_t t = 0; t < sn; ++t) {
        double* orow = po + t * static_cast<std::ptrdiff_t>(d);
        for (std::size_t j = 0; j < d; ++j) orow[j] = 0.0;
        for (std::ptrdiff_t o = -h; o <= h; ++o) {
            const std::ptrdiff_t s = std::clamp<std::ptrdiff_t>(t + o, 0, sn - 1);
            const double* ar = pa + s * static_cast<std::ptrdiff_t>(d);
            for (std::size_t j = 0; j < d; ++j) orow[j] += ar[j];
        }
        for (std::size_t j = 0; j < d; ++j) orow[j] *= inv_k;
    }
    flops::add(static_cast<std::uint64_t>(n) * k * d);

    return finish(std::move(out), "moving_average", {&a}, [&](const auto& tape) {
        const auto na = TensorAccess::node_on(a, tape);
        return [na, n, d, h, inv_k](TapeState& ts, const std::vector<double>& g) {
            const std::ptrdiff_t sn2 = static_cast<std::ptrdiff_t>(n);
            std::vector<double> ga(n * d, 0.0);
            for (std::ptrdiff_t t = 0; t < sn2; ++t) {
                const double* gr = g.data() + t * static_cast<std::ptrdiff_t>(d);
                for (std::ptrdiff_t o = -h; o <= h; ++o) {
                    const std::ptrdiff_t s = std::clamp<std::ptrdiff_t>(t + o, 0, sn2 - 1);
                    double* gd = ga.data() + s * static_cast<std::ptrdiff_t>(d);
                    for (std::size_t j = 0; j < d; ++j) gd[j] += gr[j] * inv_k;
                }
            }
            ts.accumulate(na, ga.data(), ga.size());
        };
    });
}

}  // namespace ttcnet
