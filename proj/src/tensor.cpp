// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "qbslt/errors.hpp"

namespace qbslt {

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto extent : shape) n *= extent;
    return n;
}

namespace {
void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (auto extent : shape) {
        if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    auto impl = std::make_shared<detail::TensorImpl>();
    const auto n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(n, value);
    impl->grad.assign(n, 0.0);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                             shape_str(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->grad.assign(values.size(), 0.0);
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    return from(impl_->shape, impl_->data, false);
}

void Tensor::assign(const Tensor& other) {
    if (other.shape() != shape()) {
        throw DimensionError("assign: shape " + shape_str(other.shape()) + " into " + shape_str(shape()));
    }
    std::copy(other.impl_->data.begin(), other.impl_->data.end(), impl_->data.begin());
}

Tape& Tape::local() {
    thread_local Tape tape;
    return tape;
}

void Tape::record(const Tensor& output, Adjoint adjoint) {
    auto impl = output.impl();
    impl->on_tape = true;
    entries_.push_back({std::move(impl), std::move(adjoint)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw DimensionError("backward: loss must be a scalar, got " +
                             (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    if (!loss.impl()->on_tape) throw std::logic_error("backward: loss was not produced on this tape");

    for (auto& entry : entries_) {
        std::fill(entry.output->grad.begin(), entry.output->grad.end(), 0.0);
    }
    loss.impl()->grad[0] = 1.0;

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        const auto& g = it->output->grad;
        if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
        it->adjoint();
    }
}

void Tape::clear() {
    for (auto& entry : entries_) entry.output->on_tape = false;
    entries_.clear();
}

void backward(const Tensor& loss) {
    Tape::local().backward(loss);
}

}  // namespace qbslt
