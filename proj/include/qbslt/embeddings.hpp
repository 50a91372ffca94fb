// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Token and video embeddings that feed the encoders.

#pragma once

#include <cstddef>
#include <string>

#include "qbslt/layers.hpp"
#include "qbslt/tokens.hpp"

namespace qbslt {

/// Sinusoidal position table [length x d_model], rows offset..offset+length-1.
Tensor sinusoidal_positions(std::size_t length, std::size_t d_model, std::size_t offset = 0);

/// Trainable lookup table plus sinusoidal positions.
class TextEmbedding {
public:
    TextEmbedding() = default;
    TextEmbedding(ParameterStore& store, const std::string& prefix, std::size_t vocab_size, std::size_t d_model,
                  Rng& rng);

    /// [M x d_model]; row i = table[ids[i]] + position(i).
    /// Positions start at `first_position`.
    Tensor operator()(const TokenSequence& tokens, std::size_t first_position = 0) const;

    std::size_t vocab_size() const { return vocab_size_; }
    const Tensor& table() const { return table_; }

private:
    Tensor table_;
    std::size_t vocab_size_ = 0;
    std::size_t d_model_ = 0;
};

/// Per-frame projection followed by two {conv(k=5) -> batch-norm -> ReLU ->
/// max-pool(2)} blocks. Output length is floor(floor(N / 2) / 2).
class VideoEmbedding {
public:
    static constexpr std::size_t kKernel = 5;
    static constexpr std::size_t kBlocks = 2;
    static constexpr double kBnMomentum = 0.1;
    static constexpr double kBnEps = 1e-5;

    VideoEmbedding() = default;
    VideoEmbedding(ParameterStore& store, const std::string& prefix, std::size_t frame_dim, std::size_t d_model,
                   Rng& rng);

    /// Training mode normalises with statistics over every frame of the
    /// batch and updates the running estimates; inference mode uses the
    /// running ones, so each output then depends on its own video only.
    std::vector<Tensor> operator()(const std::vector<const VideoFeatureSequence*>& videos, bool training) const;
    Tensor operator()(const VideoFeatureSequence& video, bool training) const;

    static std::size_t output_length(std::size_t frames);
    static constexpr std::size_t kMinFrames = 4;

private:
    struct Block {
        Tensor conv_weight, conv_bias;
        Tensor bn_gamma, bn_beta;
        Tensor running_mean, running_var;
    };
    std::vector<Tensor> batch_norm(const std::vector<Tensor>& xs, const Block& block, bool training) const;

    Linear projection_;
    Block blocks_[kBlocks];
    std::size_t frame_dim_ = 0;
    std::size_t d_model_ = 0;
};

/// Count of VideoEmbedding invocations on this thread; lets tests prove a
/// code path never touched video frames.
std::size_t& video_frame_reads();

}  // namespace qbslt
