// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Question-based translation: the question and video embeddings are fused
// (SSAW or an ablation), encoded by the video encoder, and one decoder pass
// over [BOS, question, translation] yields both the question loss L_D and
// the translation loss L_S.

#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "qbslt/dataset.hpp"
#include "qbslt/metrics.hpp"
#include "qbslt/model.hpp"
#include "qbslt/optim.hpp"

namespace qbslt {

/// Encoder states h for one sample. For kSsaw, `fusion` (when non-null)
/// receives the gate; other modes leave it untouched. kQuestionOnly never
/// reads the video frames. With both modalities the video rows continue the
/// question's positions, so the fused sequence has a single time axis.
/// `video_features`, when given, replaces the sample's video_embed output
/// (used for minibatch batch-norm during training).
Tensor encode_fused(const QbsltModel& model, const Sample& sample, FusionMode mode, FusionOutput* fusion = nullptr,
                    const Tensor* video_features = nullptr);

/// Tokens the decoder is seeded with before the translation starts:
/// [BOS, question...], or just [BOS] when the question is withheld.
TokenSequence decoder_prompt(const Sample& sample, FusionMode mode);

/// Embeds a decoder input whose first `prompt_length` tokens are the prompt.
/// Translation tokens restart their positions at 1, so the row that predicts
/// translation token k carries position k-1 whatever the question length.
Tensor embed_decoder_input(const QbsltModel& model, const TokenSequence& input, std::size_t prompt_length);

struct DualLoss {
    Tensor question;     // L_D
    Tensor translation;  // L_S
    Tensor total;        // L_D + L_S
};

/// Splits decoder logits [(M + N) x V] into the question rows (targets
/// `question`, length M, may be empty) and the translation rows.
DualLoss dual_loss_from_logits(const Tensor& logits, const TokenSequence& question, const TokenSequence& translation);

DualLoss dual_teacher_forced_loss(const QbsltModel& model, const Sample& sample, FusionMode mode,
                                  const Tensor* video_features = nullptr);

enum class DecodingPhase { kQuestion, kTranslation };

struct DecodingState {
    Tensor memory;
    TokenSequence prefix;  // always starts with BOS
    DecodingPhase phase = DecodingPhase::kQuestion;
};

/// Greedy decoding. The question is teacher-forced; the returned sequence is
/// the emitted translation without the terminating EOS. Never reads
/// `sample.translation`.
TokenSequence generate(const QbsltModel& model, const Sample& sample, FusionMode mode, std::size_t max_len);

/// Generates every sample in inference mode.
std::vector<Sentence> translate(QbsltModel& model, const std::vector<Sample>& samples, FusionMode mode,
                                std::size_t max_len);

/// Reference sentences: translations without EOS.
std::vector<Sentence> references(const std::vector<Sample>& samples);

ScoreReport evaluate_translation(QbsltModel& model, const std::vector<Sample>& samples, FusionMode mode,
                                 std::size_t max_len);

/// Gate summary averaged over samples (groups that are empty in a sample
/// are skipped for that sample). Inference mode, SSAW path.
GateSummary split_gate_summary(QbsltModel& model, const std::vector<Sample>& samples);

struct Stage2Config {
    FusionMode mode = FusionMode::kSsaw;
    std::size_t epochs = 20;
    std::size_t batch = 8;
    std::size_t max_len = 12;
    OptimizerConfig optimizer{OptimizerKind::kAdam, 3e-3};
    std::uint64_t seed = 1;
};

struct Stage2Step {
    std::size_t step = 0;
    double question = 0.0;
    double translation = 0.0;
    double total = 0.0;
};

struct Stage2Report {
    std::vector<Stage2Step> log;
    std::vector<double> dev_bleu4;  // per epoch
    double best_dev_bleu4 = -1.0;
    std::size_t best_epoch = 0;
};

/// Optimises L_total over `train`; after each epoch scores `dev` and keeps
/// the parameters with the best BLEU-4, which are restored at the end. When
/// `log` is set, writes "step L_D L_S L_total" per optimizer step.
Stage2Report train_stage2(QbsltModel& model, const std::vector<Sample>& train, const std::vector<Sample>& dev,
                          const Stage2Config& config, std::ostream* log = nullptr);

}  // namespace qbslt
