// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared feature space pretraining: contrastive video/text alignment of
// pooled encoder states plus masked reconstruction of the translation text.

#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "qbslt/dataset.hpp"
#include "qbslt/model.hpp"
#include "qbslt/optim.hpp"

namespace qbslt {

struct AlignmentBatch {
    Tensor video;  // pooled video representations [B x d]
    Tensor text;   // pooled text representations [B x d], row i pairs with video row i
    double temperature = 0.1;
};

/// Symmetric InfoNCE over a [B x B] logits matrix with diagonal targets:
/// half the row-wise cross-entropy plus half the column-wise one.
Tensor symmetric_contrastive_loss(const Tensor& logits);

/// Cosine-similarity logits divided by the temperature, after projecting and
/// L2-normalising both sides.
Tensor alignment_logits(const Linear& video_projection, const Linear& text_projection, const AlignmentBatch& batch);

Tensor similarity_loss(const QbsltModel& model, const AlignmentBatch& batch);

/// CLS state of the video encoder run over [CLS ; video_embed(video)].
Tensor pooled_video(const QbsltModel& model, const VideoFeatureSequence& video);
/// Same, from precomputed video_embed output.
Tensor pooled_video_features(const QbsltModel& model, const Tensor& features);
/// EOS state of the text encoder; `tokens` must contain EOS.
Tensor pooled_text(const QbsltModel& model, const TokenSequence& tokens);

struct MaskedTokens {
    TokenSequence masked;
    TokenSequence targets;  // original id where masked, kIgnoreId elsewhere
};

MaskedTokens mask_tokens(const TokenSequence& tokens, double ratio, std::uint64_t seed);

/// Text encoder over the masked sequence, decoder over [BOS, masked...],
/// cross-entropy on the masked positions only.
Tensor reconstruction_loss(const QbsltModel& model, const MaskedTokens& input);

/// Fraction of masked positions whose argmax prediction is the original id.
double masked_recovery_accuracy(QbsltModel& model, const std::vector<Sample>& samples, double ratio,
                                std::uint64_t seed);

struct Stage1Config {
    std::size_t steps = 1000;
    std::size_t batch = 16;
    double temperature = 0.1;
    double mask_ratio = 0.15;
    OptimizerConfig optimizer{OptimizerKind::kAdam};
    std::uint64_t seed = 1;
};

struct RetrievalAccuracy {
    double video_to_text = 0.0;
    double text_to_video = 0.0;
};

/// Top-1 in-batch retrieval over every sample at once, in inference mode.
RetrievalAccuracy evaluate_retrieval(QbsltModel& model, const std::vector<Sample>& samples, double temperature);

struct Stage1Step {
    std::size_t step = 0;
    double similarity = 0.0;
    double reconstruction = 0.0;
};

struct Stage1Report {
    std::vector<Stage1Step> log;
    RetrievalAccuracy initial;
    RetrievalAccuracy final;
};

/// Minibatch training of similarity_loss + reconstruction_loss. When `log`
/// is set, writes "step L_sim L_R" per step. Throws DataError on an empty
/// dataset and NumericError on a non-finite loss.
Stage1Report train_stage1(QbsltModel& model, const std::vector<Sample>& samples, const Stage1Config& config,
                          std::ostream* log = nullptr);

}  // namespace qbslt
