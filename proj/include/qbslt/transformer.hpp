// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Post-norm transformer encoder and decoder stacks over single sequences
// [length x d_model]. Padding is expressed as a per-position flag vector
// (true = padded); an empty vector means no padding.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qbslt/layers.hpp"
#include "qbslt/tokens.hpp"

namespace qbslt {

using PadMask = std::vector<bool>;

/// Additive score offset for masked attention positions; exp() of it is 0.
inline constexpr double kMaskedScore = -1e30;

struct TransformerDims {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t d_ff = 128;
    std::size_t layers = 2;
};

class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterStore& store, const std::string& prefix, std::size_t d_model, std::size_t heads,
                       Rng& rng);

    /// `mask` is an optional additive [Lq x Lk] offset. When `weights` is
    /// non-null it receives one [Lq x Lk] probability matrix per head.
    Tensor operator()(const Tensor& query_src, const Tensor& kv_src, const Tensor* mask,
                      std::vector<Tensor>* weights = nullptr) const;

private:
    Linear q_, k_, v_, o_;
    std::size_t heads_ = 1;
    std::size_t d_model_ = 0;
};

struct FeedForward {
    Linear in, out;

    FeedForward() = default;
    FeedForward(ParameterStore& store, const std::string& prefix, std::size_t d_model, std::size_t d_ff, Rng& rng);
    Tensor operator()(const Tensor& x) const;
};

class EncoderLayer {
public:
    EncoderLayer(ParameterStore& store, const std::string& prefix, const TransformerDims& dims, Rng& rng);
    Tensor operator()(const Tensor& x, const Tensor* mask, std::vector<Tensor>* weights = nullptr) const;

private:
    MultiHeadAttention attention_;
    LayerNorm norm1_;
    FeedForward ffn_;
    LayerNorm norm2_;
};

class DecoderLayer {
public:
    DecoderLayer(ParameterStore& store, const std::string& prefix, const TransformerDims& dims, Rng& rng);
    Tensor operator()(const Tensor& x, const Tensor& memory, const Tensor& self_mask, const Tensor* cross_mask) const;

private:
    MultiHeadAttention self_attention_;
    LayerNorm norm1_;
    MultiHeadAttention cross_attention_;
    LayerNorm norm2_;
    FeedForward ffn_;
    LayerNorm norm3_;
};

class EncoderStack {
public:
    EncoderStack() = default;
    EncoderStack(ParameterStore& store, const std::string& prefix, const TransformerDims& dims, Rng& rng);

    /// Contextualised states with the input's shape. Throws on a pad mask
    /// of the wrong length or one that pads every position.
    Tensor encode(const Tensor& x, const PadMask& pad_mask = {},
                  std::vector<Tensor>* attention_weights = nullptr) const;

    const TransformerDims& dims() const { return dims_; }

private:
    TransformerDims dims_;
    std::vector<EncoderLayer> layers_;
};

class DecoderStack {
public:
    DecoderStack() = default;
    DecoderStack(ParameterStore& store, const std::string& prefix, const TransformerDims& dims,
                 std::size_t vocab_size, Rng& rng);

    /// Causally masked decoding of `targets_in` [T x d] against `memory`
    /// [L x d]; returns logits [T x vocab].
    Tensor decode(const Tensor& targets_in, const Tensor& memory, const PadMask& memory_pad = {},
                  const PadMask& target_pad = {}) const;

    const Linear& output_projection() const { return output_; }
    std::size_t vocab_size() const { return vocab_size_; }

private:
    TransformerDims dims_;
    std::vector<DecoderLayer> layers_;
    Linear output_;
    std::size_t vocab_size_ = 0;
};

/// Additive key mask [rows x keys]: padded keys, plus future keys when causal.
Tensor attention_mask(std::size_t rows, const PadMask& key_pad, std::size_t keys, bool causal);

enum class PoolKind { kCls, kEos };

/// State [d_model] at the first CLS (or EOS) position of `layout`, which
/// names the token occupying each row of `states`.
Tensor pool_representation(const Tensor& states, const TokenSequence& layout, PoolKind kind);

}  // namespace qbslt
