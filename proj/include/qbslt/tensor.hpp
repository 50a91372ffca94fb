// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle: copies alias the same storage, which is what
// lets model parameters, optimizer state and the tape refer to one buffer.
// Use clone() for an independent copy. All arithmetic is in double.
//
// Every differentiable op appends one entry to the calling thread's Tape.
// Tape::backward replays the entries in reverse, so gradients are a pure
// function of the recorded sequence and are bit-reproducible.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace qbslt {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool on_tape = false;
};
}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<double> data() { return impl_->data; }
    std::span<const double> data() const { return impl_->data; }
    std::span<double> grad() { return impl_->grad; }
    std::span<const double> grad() const { return impl_->grad; }

    double& operator[](std::size_t i) { return impl_->data[i]; }
    double operator[](std::size_t i) const { return impl_->data[i]; }
    /// Row-major element access for rank-2 tensors.
    double& at(std::size_t row, std::size_t col) { return impl_->data[row * impl_->shape[1] + col]; }
    double at(std::size_t row, std::size_t col) const { return impl_->data[row * impl_->shape[1] + col]; }

    /// Value of a single-element tensor.
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }
    void zero_grad();

    /// Deep copy of values (no gradient, no tape history).
    Tensor clone() const;
    /// Overwrites values in place; shapes must agree.
    void assign(const Tensor& other);

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of executed differentiable operations for one thread.
class Tape {
public:
    using Adjoint = std::function<void()>;

    /// The calling thread's tape.
    static Tape& local();

    bool recording() const { return enabled_; }
    void set_recording(bool on) { enabled_ = on; }

    /// Appends an operation producing `output`. `adjoint` reads output's
    /// gradient and accumulates into the inputs it captured.
    void record(const Tensor& output, Adjoint adjoint);

    /// Populates gradients of every requires_grad tensor reachable from `loss`.
    /// Intermediate gradients are reset first; leaf gradients accumulate.
    void backward(const Tensor& loss);

    void clear();
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::shared_ptr<detail::TensorImpl> output;
        Adjoint adjoint;
    };
    std::vector<Entry> entries_;
    bool enabled_ = true;
};

/// Suspends recording on the local tape for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(Tape::local().recording()) { Tape::local().set_recording(false); }
    ~NoGradGuard() { Tape::local().set_recording(previous_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Backpropagates `loss` on the calling thread's tape.
void backward(const Tensor& loss);

}  // namespace qbslt
