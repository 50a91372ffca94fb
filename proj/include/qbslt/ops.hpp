// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations. Each op validates shapes, computes its forward
// value eagerly and, when any input requires a gradient and the local tape
// is recording, appends its adjoint to the tape.

#pragma once

#include <cstddef>
#include <vector>

#include "qbslt/tensor.hpp"

namespace qbslt::ops {

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Adds `row` (length n) to every row of `a` [m x n].
Tensor add_rowwise(const Tensor& a, const Tensor& row);
/// Multiplies every row of `a` [m x n] elementwise by `row` (length n).
Tensor mul_rowwise(const Tensor& a, const Tensor& row);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Softmax along `axis`, computed with max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes over the last axis (population variance), then gamma * xhat + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// Gathers rows of a rank-2 tensor: result row i is x[indices[i]].
Tensor select_index(const Tensor& x, const std::vector<std::size_t>& indices);
/// Columns [begin, begin + count) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
/// Rows [begin, begin + count) of a rank-2 tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

/// Mean over rows of [m x n] -> [1 x n].
Tensor mean_pool(const Tensor& x);
/// Sum of all entries -> scalar.
Tensor sum(const Tensor& x);

/// Scales each row of [m x n] to unit L2 norm. Throws on a zero row.
Tensor l2_normalize_rows(const Tensor& x);

/// Same-padded temporal convolution. x [T x c_in], weight [kernel x c_in x c_out],
/// bias [c_out]; kernel must be odd.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// Non-overlapping max-pool over rows with window `kernel`: [T x c] -> [T / kernel x c].
Tensor max_pool_rows(const Tensor& x, std::size_t kernel);

/// Mean negative log-softmax likelihood over rows whose target differs from
/// `ignore_id`; 0 (with zero gradient) when every row is ignored.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_id);

/// Smallest distance to a non-differentiable point seen by relu (|x|) and
/// max_pool_rows (gap between a window's two largest values) on this thread
/// since the last reset. Finite-difference checks use it to discard
/// instances that sit on a kink.
double& kink_margin();

}  // namespace qbslt::ops
