// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbslt/errors.hpp"

namespace qbslt::ops {

namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

bool tracks(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::local().recording()) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor make_output(Shape shape, bool tracked) {
    return Tensor::zeros(std::move(shape), tracked);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(t.shape()));
    }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = make_output({m, n}, tracks({&a, &b}));
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n] {
            const double* dc = oi->grad.data();
            if (ai->requires_grad) {
                const double* pb = bi->data.data();
                double* da = ai->grad.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* brow = pb + p * n;
                        const double* dcrow = dc + i * n;
                        for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
                        da[i * k + p] += acc;
                    }
                }
            }
            if (bi->requires_grad) {
                const double* pa = ai->data.data();
                double* db = bi->grad.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* dcrow = dc + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = pa[i * k + p];
                        if (av == 0.0) continue;
                        double* dbrow = db + p * n;
                        for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out = make_output({n, m}, tracks({&a}));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), oi = out.impl(), m, n] {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ai->grad[i * n + j] += oi->grad[j * m + i];
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
    }
    Tensor out = Tensor::from(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()),
                              tracks({&a}));
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), oi = out.impl()] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    Tensor out = make_output(a.shape(), tracks({&a, &b}));
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
            const auto& g = oi->grad;
            if (ai->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    Tensor out = make_output(a.shape(), tracks({&a, &b}));
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] - b[i];
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
            const auto& g = oi->grad;
            if (ai->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
        });
    }
    return out;
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "elementwise_mul");
    Tensor out = make_output(a.shape(), tracks({&a, &b}));
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
            const auto& g = oi->grad;
            if (ai->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->data[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->data[i];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out = make_output(a.shape(), tracks({&a}));
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * factor;
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), oi = out.impl(), factor] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * factor;
        });
    }
    return out;
}

namespace {
void require_row_operand(const Tensor& a, const Tensor& row, const char* op) {
    require_rank(a, 2, op);
    if (row.numel() != a.dim(1)) {
        throw DimensionError(std::string(op) + ": row operand " + shape_str(row.shape()) + " does not match " +
                             shape_str(a.shape()));
    }
}
}  // namespace

Tensor add_rowwise(const Tensor& a, const Tensor& row) {
    require_row_operand(a, row, "add_rowwise");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out = make_output(a.shape(), tracks({&a, &row}));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + row[j];
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), ri = row.impl(), oi = out.impl(), m, n] {
            const auto& g = oi->grad;
            if (ai->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            if (ri->requires_grad)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ri->grad[j] += g[i * n + j];
        });
    }
    return out;
}

Tensor mul_rowwise(const Tensor& a, const Tensor& row) {
    require_row_operand(a, row, "mul_rowwise");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out = make_output(a.shape(), tracks({&a, &row}));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] * row[j];
    if (out.requires_grad()) {
        Tape::local().record(out, [ai = a.impl(), ri = row.impl(), oi = out.impl(), m, n] {
            const auto& g = oi->grad;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (ai->requires_grad) ai->grad[i * n + j] += gij * ri->data[j];
                    if (ri->requires_grad) ri->grad[j] += gij * ai->data[i * n + j];
                }
            }
        });
    }
    return out;
}

double& kink_margin() {
    thread_local double margin = std::numeric_limits<double>::infinity();
    return margin;
}

Tensor relu(const Tensor& x) {
    Tensor out = make_output(x.shape(), tracks({&x}));
    double margin = kink_margin();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
        margin = std::min(margin, std::abs(x[i]));
    }
    kink_margin() = margin;
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl()] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i)
                if (xi->data[i] > 0.0) xi->grad[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = make_output(x.shape(), tracks({&x}));
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double v = x[i];
        // Branch on sign so exp never overflows.
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl()] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                const double s = oi->data[i];
                xi->grad[i] += oi->grad[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
    }
    const auto s = split_axis(x.shape(), axis);
    Tensor out = make_output(x.shape(), tracks({&x}));
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, x[base + e * s.inner]);
            double total = 0.0;
            for (std::size_t e = 0; e < s.extent; ++e) {
                const double v = std::exp(x[base + e * s.inner] - mx);
                out[base + e * s.inner] = v;
                total += v;
            }
            for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
        }
    }
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), s] {
            for (std::size_t o = 0; o < s.outer; ++o) {
                for (std::size_t in = 0; in < s.inner; ++in) {
                    const std::size_t base = o * s.extent * s.inner + in;
                    double dot = 0.0;
                    for (std::size_t e = 0; e < s.extent; ++e) {
                        const auto idx = base + e * s.inner;
                        dot += oi->grad[idx] * oi->data[idx];
                    }
                    for (std::size_t e = 0; e < s.extent; ++e) {
                        const auto idx = base + e * s.inner;
                        xi->grad[idx] += oi->data[idx] * (oi->grad[idx] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t n = x.shape().back();
    if (gamma.numel() != n || beta.numel() != n) {
        throw DimensionError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()) +
                             " do not match last axis of " + shape_str(x.shape()));
    }
    if (!(eps > 0.0)) throw DimensionError("layer_norm: eps must be positive");
    const std::size_t rows = x.numel() / n;
    Tensor out = make_output(x.shape(), tracks({&x, &gamma, &beta}));
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (xr[j] - mean) * inv_std[r];
            xhat[r * n + j] = h;
            out[r * n + j] = gamma[j] * h + beta[j];
        }
    }
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl(),
                                   xhat = std::move(xhat), inv_std = std::move(inv_std), rows, n] {
            const auto& g = oi->grad;
            std::vector<double> dxhat(n);
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_d = 0.0, mean_dx = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const auto idx = r * n + j;
                    if (gi->requires_grad) gi->grad[j] += g[idx] * xhat[idx];
                    if (bi->requires_grad) bi->grad[j] += g[idx];
                    dxhat[j] = g[idx] * gi->data[j];
                    mean_d += dxhat[j];
                    mean_dx += dxhat[j] * xhat[idx];
                }
                if (!xi->requires_grad) continue;
                mean_d /= static_cast<double>(n);
                mean_dx /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    const auto idx = r * n + j;
                    xi->grad[idx] += inv_std[r] * (dxhat[j] - mean_d - xhat[idx] * mean_dx);
                }
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
    Shape shape = first;
    shape[axis] = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool compatible = s.size() == first.size();
        for (std::size_t i = 0; compatible && i < s.size(); ++i) compatible = (i == axis) || s[i] == first[i];
        if (!compatible) {
            throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first) +
                                 " along axis " + std::to_string(axis));
        }
        shape[axis] += s[axis];
        tracked = tracked || tracks({&p});
    }
    Tensor out = make_output(shape, tracked);
    const auto os = split_axis(shape, axis);
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        const auto ps = split_axis(p.shape(), axis);
        const std::size_t chunk = ps.extent * ps.inner;
        for (std::size_t o = 0; o < ps.outer; ++o) {
            std::copy_n(p.data().begin() + o * chunk, chunk,
                        out.data().begin() + o * os.extent * os.inner + offset * os.inner);
        }
        offsets.push_back(offset);
        offset += ps.extent;
    }
    if (out.requires_grad()) {
        std::vector<ImplPtr> impls;
        for (const auto& p : parts) impls.push_back(p.impl());
        Tape::local().record(out, [impls = std::move(impls), offsets = std::move(offsets), oi = out.impl(), os, axis] {
            for (std::size_t k = 0; k < impls.size(); ++k) {
                auto& pi = *impls[k];
                if (!pi.requires_grad) continue;
                const auto ps = split_axis(pi.shape, axis);
                const std::size_t chunk = ps.extent * ps.inner;
                for (std::size_t o = 0; o < ps.outer; ++o) {
                    const double* src = oi->grad.data() + o * os.extent * os.inner + offsets[k] * os.inner;
                    double* dst = pi.grad.data() + o * chunk;
                    for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

Tensor select_index(const Tensor& x, const std::vector<std::size_t>& indices) {
    require_rank(x, 2, "select_index");
    if (indices.empty()) throw DimensionError("select_index: empty index list");
    const std::size_t m = x.dim(0), n = x.dim(1);
    for (auto idx : indices) {
        if (idx >= m) {
            throw DimensionError("select_index: index " + std::to_string(idx) + " out of range for " +
                                 shape_str(x.shape()));
        }
    }
    Tensor out = make_output({indices.size(), n}, tracks({&x}));
    for (std::size_t r = 0; r < indices.size(); ++r)
        std::copy_n(x.data().begin() + indices[r] * n, n, out.data().begin() + r * n);
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), indices, n] {
            for (std::size_t r = 0; r < indices.size(); ++r)
                for (std::size_t j = 0; j < n; ++j) xi->grad[indices[r] * n + j] += oi->grad[r * n + j];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank(x, 2, "slice_cols");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (count == 0 || begin + count > n) {
        throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + shape_str(x.shape()));
    }
    Tensor out = make_output({m, count}, tracks({&x}));
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(x.data().begin() + i * n + begin, count, out.data().begin() + i * count);
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), m, n, begin, count] {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < count; ++j) xi->grad[i * n + begin + j] += oi->grad[i * count + j];
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank(x, 2, "slice_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (count == 0 || begin + count > m) {
        throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + shape_str(x.shape()));
    }
    Tensor out = make_output({count, n}, tracks({&x}));
    std::copy_n(x.data().begin() + begin * n, count * n, out.data().begin());
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), begin, n] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) xi->grad[begin * n + i] += oi->grad[i];
        });
    }
    return out;
}

Tensor mean_pool(const Tensor& x) {
    require_rank(x, 2, "mean_pool");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor out = make_output({1, n}, tracks({&x}));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += x[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), m, n] {
            const double w = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) xi->grad[i * n + j] += oi->grad[j] * w;
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out = make_output({1}, tracks({&x}));
    double total = 0.0;
    for (double v : x.data()) total += v;
    out[0] = total;
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl()] {
            for (auto& g : xi->grad) g += oi->grad[0];
        });
    }
    return out;
}

Tensor l2_normalize_rows(const Tensor& x) {
    require_rank(x, 2, "l2_normalize_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor out = make_output(x.shape(), tracks({&x}));
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < n; ++j) sq += x[i * n + j] * x[i * n + j];
        if (std::isnan(sq)) throw NumericError("l2_normalize_rows: row " + std::to_string(i) + " is not finite");
        if (!(sq > 0.0)) throw DimensionError("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
        norms[i] = std::sqrt(sq);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] / norms[i];
    }
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), norms = std::move(norms), m, n] {
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += oi->grad[i * n + j] * oi->data[i * n + j];
                for (std::size_t j = 0; j < n; ++j) {
                    xi->grad[i * n + j] += (oi->grad[i * n + j] - oi->data[i * n + j] * dot) / norms[i];
                }
            }
        });
    }
    return out;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "conv1d");
    require_rank(weight, 3, "conv1d");
    const std::size_t steps = x.dim(0), c_in = x.dim(1);
    const std::size_t kernel = weight.dim(0), c_out = weight.dim(2);
    if (weight.dim(1) != c_in || bias.numel() != c_out || kernel % 2 == 0) {
        throw DimensionError("conv1d: input " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                             ", bias " + shape_str(bias.shape()) + " are inconsistent");
    }
    const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
    Tensor out = make_output({steps, c_out}, tracks({&x, &weight, &bias}));
    const double* px = x.data().data();
    const double* pw = weight.data().data();
    double* po = out.data().data();
    for (std::size_t t = 0; t < steps; ++t) {
        double* orow = po + t * c_out;
        for (std::size_t o = 0; o < c_out; ++o) orow[o] = bias[o];
        for (std::size_t k = 0; k < kernel; ++k) {
            const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
            const double* xrow = px + static_cast<std::size_t>(src) * c_in;
            for (std::size_t i = 0; i < c_in; ++i) {
                const double xv = xrow[i];
                const double* wrow = pw + (k * c_in + i) * c_out;
                for (std::size_t o = 0; o < c_out; ++o) orow[o] += xv * wrow[o];
            }
        }
    }
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), wi = weight.impl(), bi = bias.impl(), oi = out.impl(), steps,
                                   c_in, c_out, kernel, pad] {
            const double* g = oi->grad.data();
            if (bi->requires_grad)
                for (std::size_t t = 0; t < steps; ++t)
                    for (std::size_t o = 0; o < c_out; ++o) bi->grad[o] += g[t * c_out + o];
            for (std::size_t t = 0; t < steps; ++t) {
                const double* grow = g + t * c_out;
                for (std::size_t k = 0; k < kernel; ++k) {
                    const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - pad;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
                    const auto s = static_cast<std::size_t>(src);
                    for (std::size_t i = 0; i < c_in; ++i) {
                        const std::size_t w_base = (k * c_in + i) * c_out;
                        if (wi->requires_grad) {
                            const double xv = xi->data[s * c_in + i];
                            for (std::size_t o = 0; o < c_out; ++o) wi->grad[w_base + o] += xv * grow[o];
                        }
                        if (xi->requires_grad) {
                            double acc = 0.0;
                            for (std::size_t o = 0; o < c_out; ++o) acc += wi->data[w_base + o] * grow[o];
                            xi->grad[s * c_in + i] += acc;
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor max_pool_rows(const Tensor& x, std::size_t kernel) {
    require_rank(x, 2, "max_pool_rows");
    const std::size_t steps = x.dim(0), c = x.dim(1);
    if (kernel == 0 || steps < kernel) {
        throw DimensionError("max_pool_rows: window " + std::to_string(kernel) + " exceeds " + shape_str(x.shape()));
    }
    const std::size_t out_steps = steps / kernel;
    Tensor out = make_output({out_steps, c}, tracks({&x}));
    std::vector<std::size_t> argmax(out_steps * c);
    double margin = kink_margin();
    for (std::size_t t = 0; t < out_steps; ++t) {
        for (std::size_t j = 0; j < c; ++j) {
            std::size_t best = t * kernel;
            for (std::size_t k = 1; k < kernel; ++k) {
                const std::size_t r = t * kernel + k;
                if (x[r * c + j] > x[best * c + j]) best = r;
            }
            for (std::size_t k = 0; k < kernel; ++k) {
                const std::size_t r = t * kernel + k;
                // Two clamped ReLU zeros tie exactly but are not a kink of the
                // composition; the ReLU margin already covers that point.
                if (r == best || (x[best * c + j] == 0.0 && x[r * c + j] == 0.0)) continue;
                margin = std::min(margin, x[best * c + j] - x[r * c + j]);
            }
            argmax[t * c + j] = best * c + j;
            out[t * c + j] = x[best * c + j];
        }
    }
    kink_margin() = margin;
    if (out.requires_grad()) {
        Tape::local().record(out, [xi = x.impl(), oi = out.impl(), argmax = std::move(argmax)] {
            for (std::size_t i = 0; i < argmax.size(); ++i) xi->grad[argmax[i]] += oi->grad[i];
        });
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_id) {
    require_rank(logits, 2, "cross_entropy");
    const std::size_t rows = logits.dim(0), classes = logits.dim(1);
    if (targets.size() != rows) {
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                             shape_str(logits.shape()));
    }
    std::size_t counted = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const int t = targets[r];
        if (t == ignore_id) continue;
        if (t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw DimensionError("cross_entropy: target id " + std::to_string(t) + " at row " + std::to_string(r) +
                                 " outside [0, " + std::to_string(classes) + ")");
        }
        ++counted;
    }
    Tensor out = make_output({1}, tracks({&logits}));
    std::vector<double> probs(rows * classes, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] == ignore_id) continue;
        const double* z = logits.data().data() + r * classes;
        const double mx = *std::max_element(z, z + classes);
        double denom = 0.0;
        for (std::size_t k = 0; k < classes; ++k) denom += std::exp(z[k] - mx);
        const double log_denom = mx + std::log(denom);
        total += log_denom - z[targets[r]];
        for (std::size_t k = 0; k < classes; ++k) probs[r * classes + k] = std::exp(z[k] - log_denom);
    }
    out[0] = counted ? total / static_cast<double>(counted) : 0.0;
    if (out.requires_grad()) {
        Tape::local().record(out, [li = logits.impl(), oi = out.impl(), probs = std::move(probs), targets, ignore_id,
                                   rows, classes, counted] {
            if (counted == 0) return;
            const double w = oi->grad[0] / static_cast<double>(counted);
            for (std::size_t r = 0; r < rows; ++r) {
                if (targets[r] == ignore_id) continue;
                for (std::size_t k = 0; k < classes; ++k) {
                    const double onehot = static_cast<int>(k) == targets[r] ? 1.0 : 0.0;
                    li->grad[r * classes + k] += w * (probs[r * classes + k] - onehot);
                }
            }
        });
    }
    return out;
}

}  // namespace qbslt::ops
