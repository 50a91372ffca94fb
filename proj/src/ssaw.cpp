// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/ssaw.hpp"

#include <cmath>
#include <limits>

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

SsawBlock::SsawBlock(ParameterStore& store, const std::string& prefix, std::size_t d_model, std::size_t d_ff,
                     Rng& rng)
    : d_model_(d_model) {
    w_query = store.add(prefix + ".w_query", xavier_tensor({d_model, d_model}, d_model, d_model, rng));
    w_key = store.add(prefix + ".w_key", xavier_tensor({d_model, d_model}, d_model, d_model, rng));
    w_value = store.add(prefix + ".w_value", xavier_tensor({d_model, d_model}, d_model, d_model, rng));
    attn_norm = LayerNorm(store, prefix + ".attn_norm", d_model);
    ffn_in = Linear(store, prefix + ".ffn_in", d_model, d_ff, rng);
    ffn_out = Linear(store, prefix + ".ffn_out", d_ff, d_model, rng);
    ffn_norm = LayerNorm(store, prefix + ".ffn_norm", d_model);
}

FusionOutput SsawBlock::fuse(const Tensor& question, const Tensor& video) const {
    if (question.rank() != 2 || video.rank() != 2 || question.dim(1) != d_model_ || video.dim(1) != d_model_) {
        throw DimensionError("ssaw: question " + shape_str(question.shape()) + " and video " +
                             shape_str(video.shape()) + " must both have width " + std::to_string(d_model_));
    }
    FusionOutput out;
    out.boundary = question.dim(0);
    out.combined = ops::concat({question, video}, 0);

    const Tensor& fc = out.combined;
    const Tensor q = ops::matmul(fc, w_query);
    const Tensor k = ops::matmul(fc, w_key);
    const Tensor v = ops::matmul(fc, w_value);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_model_));
    const Tensor attended = ops::matmul(ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt), 1), v);
    const Tensor fa = attn_norm(ops::add(fc, attended));
    const Tensor ff = ffn_norm(ops::add(fa, ffn_out(ops::relu(ffn_in(fa)))));

    out.gate = gate_override_ ? Tensor::full(fc.shape(), *gate_override_) : ops::sigmoid(ff);
    out.fused = ops::elementwise_mul(fc, out.gate);
    return out;
}

std::vector<double> row_mean_gate(const FusionOutput& out) {
    const std::size_t rows = out.gate.dim(0), cols = out.gate.dim(1);
    std::vector<double> means(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) means[i] += out.gate.at(i, j);
        means[i] /= static_cast<double>(cols);
    }
    return means;
}

GateSummary gate_summary(const FusionOutput& out, const std::vector<bool>& informative_mask,
                         const std::vector<bool>& special) {
    if (informative_mask.size() != out.boundary) {
        throw DimensionError("gate_summary: informative mask length " + std::to_string(informative_mask.size()) +
                             " does not match " + std::to_string(out.boundary) + " question rows");
    }
    if (!special.empty() && special.size() != out.boundary) {
        throw DimensionError("gate_summary: special mask length does not match question rows");
    }
    const auto means = row_mean_gate(out);
    double sums[3] = {0, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < means.size(); ++i) {
        int group = 2;
        if (i < out.boundary) {
            if (informative_mask[i]) {
                group = 0;
            } else if (special.empty() || !special[i]) {
                group = 1;
            } else {
                continue;
            }
        }
        sums[group] += means[i];
        ++counts[group];
    }
    auto mean = [&](int g) {
        return counts[g] ? sums[g] / static_cast<double>(counts[g]) : std::numeric_limits<double>::quiet_NaN();
    };
    return {mean(0), mean(1), mean(2)};
}

}  // namespace qbslt
