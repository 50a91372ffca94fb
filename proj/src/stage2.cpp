// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

namespace {

bool uses_question(FusionMode mode) {
    return mode != FusionMode::kVideoOnly;
}

class InferenceScope {
public:
    explicit InferenceScope(QbsltModel& model) : model_(model), was_training_(model.training()) {
        model.set_training(false);
    }
    ~InferenceScope() { model_.set_training(was_training_); }
    InferenceScope(const InferenceScope&) = delete;
    InferenceScope& operator=(const InferenceScope&) = delete;

private:
    NoGradGuard no_grad_;
    QbsltModel& model_;
    bool was_training_;
};

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t v = 1; v < logits.dim(1); ++v)
        if (logits.at(row, v) > logits.at(row, best)) best = v;
    return best;
}

Tensor add_all(const std::vector<Tensor>& terms) {
    Tensor acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ops::add(acc, terms[i]);
    return acc;
}

}  // namespace

Tensor encode_fused(const QbsltModel& model, const Sample& sample, FusionMode mode, FusionOutput* fusion,
                    const Tensor* video_features) {
    auto video = [&](std::size_t first_position) {
        return video_features ? model.with_video_positions(*video_features, first_position)
                              : model.embed_video(sample.video, first_position);
    };
    Tensor x;
    switch (mode) {
        case FusionMode::kSsaw: {
            FusionOutput out = model.ssaw.fuse(model.text_embed(sample.question),
                                               video(sample.question.size()));
            x = out.fused;
            if (fusion) *fusion = std::move(out);
            break;
        }
        case FusionMode::kConcat:
            x = ops::concat({model.text_embed(sample.question), video(sample.question.size())},
                            0);
            break;
        case FusionMode::kQuestionOnly:
            x = model.text_embed(sample.question);
            break;
        case FusionMode::kVideoOnly:
            x = video(0);
            break;
    }
    return model.video_encoder.encode(x);
}

TokenSequence decoder_prompt(const Sample& sample, FusionMode mode) {
    TokenSequence prompt;
    prompt.ids.push_back(token::kBos);
    if (uses_question(mode)) prompt.ids.insert(prompt.ids.end(), sample.question.ids.begin(), sample.question.ids.end());
    return prompt;
}

Tensor embed_decoder_input(const QbsltModel& model, const TokenSequence& input, std::size_t prompt_length) {
    if (prompt_length == 0 || prompt_length > input.size()) {
        throw DimensionError("decoder input: prompt length " + std::to_string(prompt_length) + " for " +
                             std::to_string(input.size()) + " tokens");
    }
    if (prompt_length == input.size()) return model.text_embed(input);
    const auto split = input.ids.begin() + static_cast<long>(prompt_length);
    const Tensor prompt = model.text_embed(TokenSequence{{input.ids.begin(), split}});
    return ops::concat({prompt, model.text_embed(TokenSequence{{split, input.ids.end()}}, 1)}, 0);
}

DualLoss dual_loss_from_logits(const Tensor& logits, const TokenSequence& question, const TokenSequence& translation) {
    const std::size_t m = question.size(), n = translation.size();
    if (n == 0) throw DataError("dual loss: empty translation");
    if (logits.rank() != 2 || logits.dim(0) != m + n) {
        throw DimensionError("dual loss: logits " + shape_str(logits.shape()) + " for " + std::to_string(m) +
                             " question and " + std::to_string(n) + " translation positions");
    }
    std::vector<int> q_targets(m + n, kIgnoreId), s_targets(m + n, kIgnoreId);
    std::copy(question.ids.begin(), question.ids.end(), q_targets.begin());
    std::copy(translation.ids.begin(), translation.ids.end(), s_targets.begin() + static_cast<long>(m));
    DualLoss out;
    out.question = ops::cross_entropy(logits, q_targets, kIgnoreId);
    out.translation = ops::cross_entropy(logits, s_targets, kIgnoreId);
    out.total = ops::add(out.question, out.translation);
    return out;
}

DualLoss dual_teacher_forced_loss(const QbsltModel& model, const Sample& sample, FusionMode mode,
                                  const Tensor* video_features) {
    if (sample.translation.empty()) throw DataError("sample " + sample.id + ": empty translation");
    if (uses_question(mode) && sample.question.empty()) throw DataError("sample " + sample.id + ": empty question");
    const Tensor memory = encode_fused(model, sample, mode, nullptr, video_features);
    TokenSequence input = decoder_prompt(sample, mode);
    const std::size_t prompt_length = input.size();
    input.ids.insert(input.ids.end(), sample.translation.ids.begin(), sample.translation.ids.end() - 1);
    const Tensor logits = model.decoder.decode(embed_decoder_input(model, input, prompt_length), memory);
    return dual_loss_from_logits(logits, uses_question(mode) ? sample.question : TokenSequence{}, sample.translation);
}

TokenSequence generate(const QbsltModel& model, const Sample& sample, FusionMode mode, std::size_t max_len) {
    if (max_len == 0) throw ConfigError("generate: max_len must be >= 1");
    DecodingState state{encode_fused(model, sample, mode), decoder_prompt(sample, mode), DecodingPhase::kQuestion};
    const std::size_t translation_start = state.prefix.size();
    state.phase = DecodingPhase::kTranslation;
    while (state.prefix.size() - translation_start < max_len) {
        const Tensor logits = model.decoder.decode(embed_decoder_input(model, state.prefix, translation_start), state.memory);
        const auto next = static_cast<int>(argmax_row(logits, logits.dim(0) - 1));
        if (next == token::kEos) break;
        state.prefix.ids.push_back(next);
    }
    return TokenSequence{{state.prefix.ids.begin() + static_cast<long>(translation_start), state.prefix.ids.end()}};
}

std::vector<Sentence> translate(QbsltModel& model, const std::vector<Sample>& samples, FusionMode mode,
                                std::size_t max_len) {
    InferenceScope scope(model);
    std::vector<Sentence> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(generate(model, s, mode, max_len).ids);
    return out;
}

std::vector<Sentence> references(const std::vector<Sample>& samples) {
    std::vector<Sentence> refs;
    refs.reserve(samples.size());
    for (const auto& s : samples) {
        Sentence r = s.translation.ids;
        if (!r.empty() && r.back() == token::kEos) r.pop_back();
        refs.push_back(std::move(r));
    }
    return refs;
}

ScoreReport evaluate_translation(QbsltModel& model, const std::vector<Sample>& samples, FusionMode mode,
                                 std::size_t max_len) {
    return score_corpus(translate(model, samples, mode, max_len), references(samples));
}

GateSummary split_gate_summary(QbsltModel& model, const std::vector<Sample>& samples) {
    InferenceScope scope(model);
    double sums[3] = {0, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& s : samples) {
        FusionOutput out;
        encode_fused(model, s, FusionMode::kSsaw, &out);
        std::vector<bool> special(s.question.size());
        for (std::size_t i = 0; i < special.size(); ++i) special[i] = is_special(s.question[i]);
        const GateSummary g = gate_summary(out, s.informative, special);
        const double values[3] = {g.informative, g.distractor, g.video};
        for (int k = 0; k < 3; ++k) {
            if (std::isnan(values[k])) continue;
            sums[k] += values[k];
            ++counts[k];
        }
    }
    auto mean = [&](int k) { return counts[k] ? sums[k] / static_cast<double>(counts[k]) : std::nan(""); };
    return {mean(0), mean(1), mean(2)};
}

Stage2Report train_stage2(QbsltModel& model, const std::vector<Sample>& train, const std::vector<Sample>& dev,
                          const Stage2Config& config, std::ostream* log) {
    if (train.empty()) throw DataError("stage 2: empty training set");
    if (dev.empty()) throw DataError("stage 2: empty dev set");
    if (config.batch == 0 || config.epochs == 0) throw ConfigError("stage 2: batch and epochs must be >= 1");

    Optimizer optimizer(model.params().trainable(), config.optimizer);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Tape& tape = Tape::local();
    Stage2Report report;
    std::vector<Tensor> best;
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        model.set_training(true);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
            const std::size_t end = std::min(order.size(), begin + config.batch);
            const double weight = 1.0 / static_cast<double>(end - begin);
            std::vector<Tensor> features;
            if (config.mode != FusionMode::kQuestionOnly) {
                std::vector<const VideoFeatureSequence*> videos;
                for (std::size_t i = begin; i < end; ++i) videos.push_back(&train[order[i]].video);
                features = model.video_features(videos);
            }
            std::vector<Tensor> question_terms, translation_terms;
            for (std::size_t i = begin; i < end; ++i) {
                const Tensor* video = features.empty() ? nullptr : &features[i - begin];
                const DualLoss loss = dual_teacher_forced_loss(model, train[order[i]], config.mode, video);
                if (!std::isfinite(loss.total.item())) {
                    throw NumericError("stage 2: non-finite loss at step " + std::to_string(step) + " (sample " +
                                       train[order[i]].id + ")");
                }
                question_terms.push_back(loss.question);
                translation_terms.push_back(loss.translation);
            }
            // Batch means first, then the sum, so the logged total is exactly L_D + L_S.
            const Tensor question = ops::scale(add_all(question_terms), weight);
            const Tensor translation = ops::scale(add_all(translation_terms), weight);
            const Tensor total = ops::add(question, translation);
            backward(total);
            tape.clear();
            const Stage2Step entry{step, question.item(), translation.item(), total.item()};
            optimizer.step();
            optimizer.zero_grad();
            report.log.push_back(entry);
            if (log) *log << entry.step << ' ' << entry.question << ' ' << entry.translation << ' ' << entry.total << '\n';
            ++step;
        }
        const double bleu4 = evaluate_translation(model, dev, config.mode, config.max_len).bleu[3];
        report.dev_bleu4.push_back(bleu4);
        if (epoch == 0 || bleu4 > report.best_dev_bleu4) {
            report.best_dev_bleu4 = bleu4;
            report.best_epoch = epoch;
            best = model.params().snapshot();
        }
    }
    model.params().restore(best);
    model.set_training(false);
    return report;
}

}  // namespace qbslt
