// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/embeddings.hpp"

#include <cmath>

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

std::size_t& video_frame_reads() {
    thread_local std::size_t reads = 0;
    return reads;
}

Tensor sinusoidal_positions(std::size_t length, std::size_t d_model, std::size_t offset) {
    Tensor pe = Tensor::zeros({length, d_model});
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < d_model; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
            const double angle = static_cast<double>(pos + offset) / std::pow(10000.0, exponent);
            pe.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

TextEmbedding::TextEmbedding(ParameterStore& store, const std::string& prefix, std::size_t vocab_size,
                             std::size_t d_model, Rng& rng)
    : vocab_size_(vocab_size), d_model_(d_model) {
    table_ = store.add(prefix + ".table", normal_tensor({vocab_size, d_model}, 1.0, rng));
}

Tensor TextEmbedding::operator()(const TokenSequence& tokens, std::size_t first_position) const {
    if (tokens.empty()) throw DataError("text embedding of an empty token sequence");
    tokens.validate(vocab_size_);
    std::vector<std::size_t> rows(tokens.ids.begin(), tokens.ids.end());
    return ops::add(ops::select_index(table_, rows), sinusoidal_positions(rows.size(), d_model_, first_position));
}

VideoEmbedding::VideoEmbedding(ParameterStore& store, const std::string& prefix, std::size_t frame_dim,
                               std::size_t d_model, Rng& rng)
    : frame_dim_(frame_dim), d_model_(d_model) {
    projection_ = Linear(store, prefix + ".projection", frame_dim, d_model, rng);
    for (std::size_t b = 0; b < kBlocks; ++b) {
        const std::string p = prefix + ".block" + std::to_string(b);
        auto& blk = blocks_[b];
        blk.conv_weight = store.add(p + ".conv.weight",
                                    xavier_tensor({kKernel, d_model, d_model}, kKernel * d_model, d_model, rng));
        blk.conv_bias = store.add(p + ".conv.bias", Tensor::zeros({d_model}));
        blk.bn_gamma = store.add(p + ".bn.gamma", Tensor::full({d_model}, 1.0));
        blk.bn_beta = store.add(p + ".bn.beta", Tensor::zeros({d_model}));
        blk.running_mean = store.add(p + ".bn.running_mean", Tensor::zeros({d_model}), false);
        blk.running_var = store.add(p + ".bn.running_var", Tensor::full({d_model}, 1.0), false);
    }
}

std::size_t VideoEmbedding::output_length(std::size_t frames) {
    return (frames / 2) / 2;
}

std::vector<Tensor> VideoEmbedding::batch_norm(const std::vector<Tensor>& xs, const Block& blk, bool training) const {
    if (training) {
        // Per-channel statistics over all frames of the batch: layer-norm of
        // the transposed, row-concatenated input.
        const Tensor x = xs.size() == 1 ? xs.front() : ops::concat(xs, 0);
        const std::size_t steps = x.dim(0), channels = x.dim(1);
        Tensor xt = ops::transpose(x);
        Tensor normed = ops::layer_norm(xt, Tensor::full({steps}, 1.0), Tensor::zeros({steps}), kBnEps);
        Tensor y = ops::add_rowwise(ops::mul_rowwise(ops::transpose(normed), blk.bn_gamma), blk.bn_beta);

        Tensor running_mean = blk.running_mean;
        Tensor running_var = blk.running_var;
        for (std::size_t c = 0; c < channels; ++c) {
            double mean = 0.0;
            for (std::size_t t = 0; t < steps; ++t) mean += x.at(t, c);
            mean /= static_cast<double>(steps);
            double var = 0.0;
            for (std::size_t t = 0; t < steps; ++t) var += (x.at(t, c) - mean) * (x.at(t, c) - mean);
            var /= static_cast<double>(steps > 1 ? steps - 1 : 1);
            running_mean[c] = (1.0 - kBnMomentum) * running_mean[c] + kBnMomentum * mean;
            running_var[c] = (1.0 - kBnMomentum) * running_var[c] + kBnMomentum * var;
        }
        if (xs.size() == 1) return {y};
        std::vector<Tensor> out;
        std::size_t row = 0;
        for (const auto& part : xs) {
            out.push_back(ops::slice_rows(y, row, part.dim(0)));
            row += part.dim(0);
        }
        return out;
    }
    const std::size_t channels = xs.front().dim(1);
    Tensor shift = Tensor::zeros({channels});
    Tensor inv_std = Tensor::zeros({channels});
    for (std::size_t c = 0; c < channels; ++c) {
        shift[c] = -blk.running_mean[c];
        inv_std[c] = 1.0 / std::sqrt(blk.running_var[c] + kBnEps);
    }
    std::vector<Tensor> out;
    for (const auto& x : xs) {
        Tensor normed = ops::mul_rowwise(ops::add_rowwise(x, shift), inv_std);
        out.push_back(ops::add_rowwise(ops::mul_rowwise(normed, blk.bn_gamma), blk.bn_beta));
    }
    return out;
}

std::vector<Tensor> VideoEmbedding::operator()(const std::vector<const VideoFeatureSequence*>& videos,
                                               bool training) const {
    if (videos.empty()) throw DataError("video embedding of an empty batch");
    std::vector<Tensor> hs;
    for (const VideoFeatureSequence* video : videos) {
        ++video_frame_reads();
        if (video->frame_dim != frame_dim_) {
            throw DataError("video frame_dim " + std::to_string(video->frame_dim) + " does not match model frame_dim " +
                            std::to_string(frame_dim_));
        }
        const std::size_t frames = video->frames();
        if (frames < kMinFrames) {
            throw DataError("video has " + std::to_string(frames) + " frames; at least " + std::to_string(kMinFrames) +
                            " are required");
        }
        Tensor x = Tensor::from({frames, frame_dim_}, std::vector<double>(video->values.begin(), video->values.end()));
        hs.push_back(projection_(x));
    }
    for (const auto& blk : blocks_) {
        for (auto& h : hs) h = ops::conv1d(h, blk.conv_weight, blk.conv_bias);
        hs = batch_norm(hs, blk, training);
        for (auto& h : hs) h = ops::max_pool_rows(ops::relu(h), 2);
    }
    return hs;
}

Tensor VideoEmbedding::operator()(const VideoFeatureSequence& video, bool training) const {
    return (*this)(std::vector<const VideoFeatureSequence*>{&video}, training).front();
}

}  // namespace qbslt
