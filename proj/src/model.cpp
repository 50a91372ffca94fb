// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/model.hpp"

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

FusionMode parse_fusion_mode(const std::string& name) {
    if (name == "ssaw") return FusionMode::kSsaw;
    if (name == "concat") return FusionMode::kConcat;
    if (name == "question-only") return FusionMode::kQuestionOnly;
    if (name == "video-only") return FusionMode::kVideoOnly;
    throw ConfigError("unknown fusion mode '" + name + "' (expected ssaw|concat|question-only|video-only)");
}

std::string to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::kSsaw: return "ssaw";
        case FusionMode::kConcat: return "concat";
        case FusionMode::kQuestionOnly: return "question-only";
        case FusionMode::kVideoOnly: return "video-only";
    }
    return "?";
}

const std::vector<std::string>& reused_prefixes() {
    static const std::vector<std::string> prefixes = {"text_embed.", "video_embed.", "video_encoder.", "decoder."};
    return prefixes;
}

QbsltModel::QbsltModel(const ModelConfig& config) : config_(config) {
    if (config.vocab_size <= static_cast<std::size_t>(token::kNumSpecial)) {
        throw ConfigError("vocabulary must be larger than the special-token block");
    }
    Rng rng(config.seed);
    const TransformerDims enc{config.d_model, config.heads, config.d_ff, config.encoder_layers};
    const TransformerDims dec{config.d_model, config.heads, config.d_ff, config.decoder_layers};
    text_embed = TextEmbedding(params_, "text_embed", config.vocab_size, config.d_model, rng);
    video_embed = VideoEmbedding(params_, "video_embed", config.frame_dim, config.d_model, rng);
    video_cls = params_.add("video_encoder.cls", normal_tensor({1, config.d_model}, 1.0, rng));
    video_encoder = EncoderStack(params_, "video_encoder", enc, rng);
    text_encoder = EncoderStack(params_, "text_encoder", enc, rng);
    decoder = DecoderStack(params_, "decoder", dec, config.vocab_size, rng);
    video_projection = Linear(params_, "align.video_proj", config.d_model, config.d_model, rng);
    text_projection = Linear(params_, "align.text_proj", config.d_model, config.d_model, rng);
    ssaw = SsawBlock(params_, "ssaw", config.d_model, config.d_ff, rng);
}

Tensor QbsltModel::embed_video(const VideoFeatureSequence& video, std::size_t first_position) const {
    return with_video_positions(video_embed(video, training_), first_position);
}

std::vector<Tensor> QbsltModel::video_features(const std::vector<const VideoFeatureSequence*>& videos) const {
    return video_embed(videos, training_);
}

Tensor QbsltModel::with_video_positions(const Tensor& features, std::size_t first_position) const {
    return ops::add(features, sinusoidal_positions(features.dim(0), config_.d_model, first_position));
}

}  // namespace qbslt
