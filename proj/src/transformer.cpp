// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& prefix, std::size_t d_model,
                                       std::size_t heads, Rng& rng)
    : heads_(heads), d_model_(d_model) {
    if (heads == 0 || d_model % heads != 0) {
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                          " heads");
    }
    q_ = Linear(store, prefix + ".q", d_model, d_model, rng);
    k_ = Linear(store, prefix + ".k", d_model, d_model, rng);
    v_ = Linear(store, prefix + ".v", d_model, d_model, rng);
    o_ = Linear(store, prefix + ".o", d_model, d_model, rng);
}

Tensor MultiHeadAttention::operator()(const Tensor& query_src, const Tensor& kv_src, const Tensor* mask,
                                      std::vector<Tensor>* weights) const {
    const Tensor q = q_(query_src);
    const Tensor k = k_(kv_src);
    const Tensor v = v_(kv_src);
    const std::size_t head_dim = d_model_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Tensor> outputs;
    outputs.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
        Tensor qh = heads_ == 1 ? q : ops::slice_cols(q, h * head_dim, head_dim);
        Tensor kh = heads_ == 1 ? k : ops::slice_cols(k, h * head_dim, head_dim);
        Tensor vh = heads_ == 1 ? v : ops::slice_cols(v, h * head_dim, head_dim);
        Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
        if (mask) scores = ops::add(scores, *mask);
        Tensor probs = ops::softmax(scores, 1);
        if (weights) weights->push_back(probs);
        outputs.push_back(ops::matmul(probs, vh));
    }
    return o_(heads_ == 1 ? outputs.front() : ops::concat(outputs, 1));
}

FeedForward::FeedForward(ParameterStore& store, const std::string& prefix, std::size_t d_model, std::size_t d_ff,
                         Rng& rng)
    : in(store, prefix + ".in", d_model, d_ff, rng), out(store, prefix + ".out", d_ff, d_model, rng) {}

Tensor FeedForward::operator()(const Tensor& x) const {
    return out(ops::relu(in(x)));
}

EncoderLayer::EncoderLayer(ParameterStore& store, const std::string& prefix, const TransformerDims& dims, Rng& rng)
    : attention_(store, prefix + ".attn", dims.d_model, dims.heads, rng),
      norm1_(store, prefix + ".norm1", dims.d_model),
      ffn_(store, prefix + ".ffn", dims.d_model, dims.d_ff, rng),
      norm2_(store, prefix + ".norm2", dims.d_model) {}

Tensor EncoderLayer::operator()(const Tensor& x, const Tensor* mask, std::vector<Tensor>* weights) const {
    Tensor h = norm1_(ops::add(x, attention_(x, x, mask, weights)));
    return norm2_(ops::add(h, ffn_(h)));
}

DecoderLayer::DecoderLayer(ParameterStore& store, const std::string& prefix, const TransformerDims& dims, Rng& rng)
    : self_attention_(store, prefix + ".self_attn", dims.d_model, dims.heads, rng),
      norm1_(store, prefix + ".norm1", dims.d_model),
      cross_attention_(store, prefix + ".cross_attn", dims.d_model, dims.heads, rng),
      norm2_(store, prefix + ".norm2", dims.d_model),
      ffn_(store, prefix + ".ffn", dims.d_model, dims.d_ff, rng),
      norm3_(store, prefix + ".norm3", dims.d_model) {}

Tensor DecoderLayer::operator()(const Tensor& x, const Tensor& memory, const Tensor& self_mask,
                                const Tensor* cross_mask) const {
    Tensor h = norm1_(ops::add(x, self_attention_(x, x, &self_mask)));
    h = norm2_(ops::add(h, cross_attention_(h, memory, cross_mask)));
    return norm3_(ops::add(h, ffn_(h)));
}

Tensor attention_mask(std::size_t rows, const PadMask& key_pad, std::size_t keys, bool causal) {
    Tensor mask = Tensor::zeros({rows, keys});
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < keys; ++j) {
            const bool padded = !key_pad.empty() && key_pad[j];
            if (padded || (causal && j > i)) mask.at(i, j) = kMaskedScore;
        }
    }
    return mask;
}

namespace {
void check_pad_mask(const PadMask& pad, std::size_t length, const char* what) {
    if (pad.empty()) return;
    if (pad.size() != length) {
        throw DimensionError(std::string(what) + ": pad mask length " + std::to_string(pad.size()) +
                             " does not match sequence length " + std::to_string(length));
    }
    if (std::all_of(pad.begin(), pad.end(), [](bool p) { return p; })) {
        throw DimensionError(std::string(what) + ": every position is padded");
    }
}

bool any_padded(const PadMask& pad) {
    return std::any_of(pad.begin(), pad.end(), [](bool p) { return p; });
}
}  // namespace

EncoderStack::EncoderStack(ParameterStore& store, const std::string& prefix, const TransformerDims& dims, Rng& rng)
    : dims_(dims) {
    for (std::size_t l = 0; l < dims.layers; ++l) layers_.emplace_back(store, prefix + ".layer" + std::to_string(l), dims, rng);
}

Tensor EncoderStack::encode(const Tensor& x, const PadMask& pad_mask, std::vector<Tensor>* attention_weights) const {
    if (!x.defined() || x.rank() != 2 || x.dim(1) != dims_.d_model) {
        throw DimensionError("encode: expected [L x " + std::to_string(dims_.d_model) + "] input");
    }
    check_pad_mask(pad_mask, x.dim(0), "encode");
    Tensor mask;
    if (any_padded(pad_mask)) mask = attention_mask(x.dim(0), pad_mask, x.dim(0), false);
    Tensor h = x;
    for (const auto& layer : layers_) h = layer(h, mask.defined() ? &mask : nullptr, attention_weights);
    return h;
}

DecoderStack::DecoderStack(ParameterStore& store, const std::string& prefix, const TransformerDims& dims,
                           std::size_t vocab_size, Rng& rng)
    : dims_(dims), vocab_size_(vocab_size) {
    for (std::size_t l = 0; l < dims.layers; ++l) layers_.emplace_back(store, prefix + ".layer" + std::to_string(l), dims, rng);
    output_ = Linear(store, prefix + ".output", dims.d_model, vocab_size, rng);
}

Tensor DecoderStack::decode(const Tensor& targets_in, const Tensor& memory, const PadMask& memory_pad,
                            const PadMask& target_pad) const {
    if (!memory.defined()) throw DimensionError("decode: memory is empty");
    if (!targets_in.defined()) throw DimensionError("decode: no target positions");
    if (targets_in.rank() != 2 || memory.rank() != 2 || targets_in.dim(1) != dims_.d_model ||
        memory.dim(1) != dims_.d_model) {
        throw DimensionError("decode: inputs " + shape_str(targets_in.shape()) + " / " + shape_str(memory.shape()) +
                             " do not have width " + std::to_string(dims_.d_model));
    }
    const std::size_t steps = targets_in.dim(0), keys = memory.dim(0);
    check_pad_mask(memory_pad, keys, "decode memory");
    if (!target_pad.empty() && target_pad.size() != steps) {
        throw DimensionError("decode: target pad mask length " + std::to_string(target_pad.size()) +
                             " does not match " + std::to_string(steps) + " positions");
    }
    const Tensor self_mask = attention_mask(steps, target_pad, steps, true);
    Tensor cross_mask;
    if (any_padded(memory_pad)) cross_mask = attention_mask(steps, memory_pad, keys, false);
    Tensor h = targets_in;
    for (const auto& layer : layers_) h = layer(h, memory, self_mask, cross_mask.defined() ? &cross_mask : nullptr);
    return output_(h);
}

Tensor pool_representation(const Tensor& states, const TokenSequence& layout, PoolKind kind) {
    if (states.rank() != 2 || states.dim(0) != layout.size()) {
        throw DimensionError("pool_representation: layout of " + std::to_string(layout.size()) +
                             " tokens for states " + shape_str(states.shape()));
    }
    const int wanted = kind == PoolKind::kCls ? token::kCls : token::kEos;
    const std::size_t pos = layout.find(wanted);
    if (pos == layout.size()) {
        throw DataError(std::string("pool_representation: sequence has no ") + (kind == PoolKind::kCls ? "CLS" : "EOS") +
                        " token");
    }
    return ops::reshape(ops::select_index(states, {pos}), {states.dim(1)});
}

}  // namespace qbslt
