// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sigmoid self-attention weighting: the question and video embedding
// sequences are concatenated in time (f_c), passed through one single-head
// self-attention + feed-forward block with post-norm residuals (f_f), and
// sigmoid(f_f) gates f_c elementwise.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qbslt/layers.hpp"

namespace qbslt {

struct FusionOutput {
    Tensor fused;     // combined * gate, [(M + N') x d_model]
    Tensor gate;      // sigmoid(f_f), same shape, entries in (0, 1)
    Tensor combined;  // f_c
    std::size_t boundary = 0;  // rows [0, boundary) come from the question
};

class SsawBlock {
public:
    SsawBlock() = default;
    SsawBlock(ParameterStore& store, const std::string& prefix, std::size_t d_model, std::size_t d_ff, Rng& rng);

    FusionOutput fuse(const Tensor& question, const Tensor& video) const;

    /// Test hook: replaces sigmoid(f_f) by a constant.
    void set_gate_override(std::optional<double> value) { gate_override_ = value; }

    Tensor w_query, w_key, w_value;
    Linear ffn_in, ffn_out;
    LayerNorm attn_norm, ffn_norm;

private:
    std::size_t d_model_ = 0;
    std::optional<double> gate_override_;
};

/// Channel-averaged gate of every fused row.
std::vector<double> row_mean_gate(const FusionOutput& out);

struct GateSummary {
    double informative = 0.0;  // NaN when the group is empty
    double distractor = 0.0;   // non-informative, non-special question tokens
    double video = 0.0;
};

/// Per-group means of the channel-averaged gate. `special` (optional,
/// length M) excludes special tokens from the distractor group.
GateSummary gate_summary(const FusionOutput& out, const std::vector<bool>& informative_mask,
                         const std::vector<bool>& special = {});

}  // namespace qbslt
