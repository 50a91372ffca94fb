// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/layers.hpp"

#include <cmath>

#include "qbslt/ops.hpp"

namespace qbslt {

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

Tensor xavier_tensor(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    return normal_tensor(std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Linear::Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
               bool with_bias) {
    weight = store.add(prefix + ".weight", xavier_tensor({in, out}, in, out, rng));
    if (with_bias) bias = store.add(prefix + ".bias", Tensor::zeros({out}));
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = ops::matmul(x, weight);
    return bias.defined() ? ops::add_rowwise(y, bias) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& prefix, std::size_t width) {
    gamma = store.add(prefix + ".gamma", Tensor::full({width}, 1.0));
    beta = store.add(prefix + ".beta", Tensor::zeros({width}));
}

Tensor LayerNorm::operator()(const Tensor& x) const {
    return ops::layer_norm(x, gamma, beta, eps);
}

}  // namespace qbslt
