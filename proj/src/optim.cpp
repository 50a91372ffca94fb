// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/optim.hpp"

#include <cmath>

#include "qbslt/errors.hpp"

namespace qbslt {

OptimizerKind parse_optimizer_kind(const std::string& name) {
    if (name == "momentum") return OptimizerKind::kMomentum;
    if (name == "adam") return OptimizerKind::kAdam;
    throw ConfigError("unknown optimizer '" + name + "' (expected momentum|adam)");
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::kAdam ? "adam" : "momentum";
}

Optimizer::Optimizer(std::vector<Tensor> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
        first_.emplace_back(p.numel(), 0.0);
        if (config_.kind == OptimizerKind::kAdam) second_.emplace_back(p.numel(), 0.0);
    }
}

double Optimizer::step() {
    double sq = 0.0;
    for (const auto& p : params_)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    const double factor = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

    ++steps_;
    const double lr = config_.learning_rate;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto value = params_[k].data();
        auto grad = params_[k].grad();
        auto& m = first_[k];
        if (config_.kind == OptimizerKind::kMomentum) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                m[i] = config_.momentum * m[i] + grad[i] * factor;
                value[i] -= lr * m[i];
            }
        } else {
            auto& v = second_[k];
            const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
            const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
            for (std::size_t i = 0; i < value.size(); ++i) {
                const double g = grad[i] * factor;
                m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
                v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
                value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_eps);
            }
        }
    }
    return norm;
}

void Optimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace qbslt
