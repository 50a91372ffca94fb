// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// All trainable components of both training stages in one parameter store.
// Parameter names are stable and form the checkpoint contract:
//   text_embed.*     token table (shared by every text path)
//   video_embed.*    frame projection + temporal conv stack
//   video_encoder.*  video encoder, incl. the learned CLS row
//   text_encoder.*   text encoder (alignment + masked reconstruction)
//   decoder.*        text decoder incl. vocabulary projection
//   align.*          contrastive projection heads
//   ssaw.*           fusion block (trained in stage 2 only)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbslt/embeddings.hpp"
#include "qbslt/ssaw.hpp"
#include "qbslt/transformer.hpp"

namespace qbslt {

enum class FusionMode { kSsaw, kConcat, kQuestionOnly, kVideoOnly };

FusionMode parse_fusion_mode(const std::string& name);
std::string to_string(FusionMode mode);

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t frame_dim = 16;
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t d_ff = 128;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 2;
    std::uint64_t seed = 1;
};

/// Prefixes of the modules whose stage-1 weights initialise stage 2.
const std::vector<std::string>& reused_prefixes();

class QbsltModel {
public:
    explicit QbsltModel(const ModelConfig& config);
    QbsltModel(const QbsltModel&) = delete;
    QbsltModel& operator=(const QbsltModel&) = delete;

    const ModelConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Training mode uses per-sequence batch-norm statistics.
    bool training() const { return training_; }
    void set_training(bool on) { training_ = on; }

    /// video_embed plus sinusoidal positions from `first_position`: [N' x d_model].
    Tensor embed_video(const VideoFeatureSequence& video, std::size_t first_position = 0) const;
    /// video_embed over a minibatch (shared batch-norm statistics in training
    /// mode), without positions.
    std::vector<Tensor> video_features(const std::vector<const VideoFeatureSequence*>& videos) const;
    Tensor with_video_positions(const Tensor& features, std::size_t first_position) const;

    TextEmbedding text_embed;
    VideoEmbedding video_embed;
    Tensor video_cls;
    EncoderStack video_encoder;
    EncoderStack text_encoder;
    DecoderStack decoder;
    Linear video_projection;
    Linear text_projection;
    SsawBlock ssaw;

private:
    ModelConfig config_;
    ParameterStore params_;
    bool training_ = true;
};

}  // namespace qbslt
