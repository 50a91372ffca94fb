// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "qbslt/tensor.hpp"

namespace qbslt {

enum class OptimizerKind { kMomentum, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::kMomentum;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

/// Gradient descent over a fixed parameter list. Gradients are read from the
/// tensors and left untouched; callers zero them between steps.
class Optimizer {
public:
    Optimizer(std::vector<Tensor> params, OptimizerConfig config);

    /// Clips, updates and returns the pre-clip global gradient norm.
    /// Throws NumericError when any gradient is non-finite.
    double step();

    void zero_grad();
    const OptimizerConfig& config() const { return config_; }

private:
    std::vector<Tensor> params_;
    OptimizerConfig config_;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
    long steps_ = 0;
};

}  // namespace qbslt
