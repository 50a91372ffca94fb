// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "qbslt/parameters.hpp"
#include "qbslt/tensor.hpp"

namespace qbslt {

using Rng = std::mt19937_64;

/// Normal(0, stddev) initialised tensor.
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);
/// Glorot normal for a weight with the given fan-in and fan-out.
Tensor xavier_tensor(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y = x W + b with W [in x out].
struct Linear {
    Tensor weight;
    Tensor bias;

    Linear() = default;
    Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
           bool with_bias = true);
    Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;
    double eps = 1e-5;

    LayerNorm() = default;
    LayerNorm(ParameterStore& store, const std::string& prefix, std::size_t width);
    Tensor operator()(const Tensor& x) const;
};

}  // namespace qbslt
