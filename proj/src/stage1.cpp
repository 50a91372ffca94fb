// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

namespace {

std::vector<int> diagonal_targets(std::size_t n) {
    std::vector<int> t(n);
    std::iota(t.begin(), t.end(), 0);
    return t;
}

Tensor as_row(const Tensor& v) {
    return ops::reshape(v, {1, v.numel()});
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

TokenSequence restore_original(const MaskedTokens& input) {
    TokenSequence original = input.masked;
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (input.targets[i] != kIgnoreId) original.ids[i] = input.targets[i];
    }
    return original;
}

Tensor reconstruction_logits(const QbsltModel& model, const MaskedTokens& input) {
    const Tensor memory = model.text_encoder.encode(model.text_embed(input.masked));
    TokenSequence shifted;
    shifted.ids.push_back(token::kBos);
    const TokenSequence original = restore_original(input);
    shifted.ids.insert(shifted.ids.end(), original.ids.begin(), original.ids.end() - 1);
    return model.decoder.decode(model.text_embed(shifted), memory);
}

void check_finite(double value, const char* what, std::size_t step) {
    if (!std::isfinite(value)) {
        throw NumericError(std::string("stage 1: non-finite ") + what + " at step " + std::to_string(step));
    }
}

}  // namespace

Tensor symmetric_contrastive_loss(const Tensor& logits) {
    if (logits.rank() != 2 || logits.dim(0) != logits.dim(1) || logits.dim(0) == 0) {
        throw DimensionError("contrastive loss: expected square logits, got " + shape_str(logits.shape()));
    }
    const auto targets = diagonal_targets(logits.dim(0));
    Tensor rows = ops::cross_entropy(logits, targets, kIgnoreId);
    Tensor cols = ops::cross_entropy(ops::transpose(logits), targets, kIgnoreId);
    return ops::add(ops::scale(rows, 0.5), ops::scale(cols, 0.5));
}

Tensor alignment_logits(const Linear& video_projection, const Linear& text_projection, const AlignmentBatch& batch) {
    if (!(batch.temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (batch.video.rank() != 2 || batch.text.rank() != 2 || batch.video.dim(0) != batch.text.dim(0) ||
        batch.video.dim(0) == 0) {
        throw DimensionError("alignment batch: video " + shape_str(batch.video.shape()) + " vs text " +
                             shape_str(batch.text.shape()));
    }
    const Tensor iv = ops::l2_normalize_rows(video_projection(batch.video));
    const Tensor is = ops::l2_normalize_rows(text_projection(batch.text));
    return ops::scale(ops::matmul(iv, ops::transpose(is)), 1.0 / batch.temperature);
}

Tensor similarity_loss(const QbsltModel& model, const AlignmentBatch& batch) {
    return symmetric_contrastive_loss(alignment_logits(model.video_projection, model.text_projection, batch));
}

Tensor pooled_video(const QbsltModel& model, const VideoFeatureSequence& video) {
    return pooled_video_features(model, model.video_embed(video, model.training()));
}

Tensor pooled_video_features(const QbsltModel& model, const Tensor& features) {
    const Tensor x = ops::concat({model.video_cls, model.with_video_positions(features, 0)}, 0);
    return ops::reshape(ops::select_index(model.video_encoder.encode(x), {0}), {model.config().d_model});
}

Tensor pooled_text(const QbsltModel& model, const TokenSequence& tokens) {
    return pool_representation(model.text_encoder.encode(model.text_embed(tokens)), tokens, PoolKind::kEos);
}

MaskedTokens mask_tokens(const TokenSequence& tokens, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("mask ratio must lie in [0, 1]");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(ratio);
    MaskedTokens out{tokens, TokenSequence{std::vector<int>(tokens.size(), kIgnoreId)}};
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (is_special(tokens[i])) continue;
        if (coin(rng)) {
            out.targets.ids[i] = tokens[i];
            out.masked.ids[i] = token::kMask;
        }
    }
    return out;
}

Tensor reconstruction_loss(const QbsltModel& model, const MaskedTokens& input) {
    if (input.masked.size() != input.targets.size() || input.masked.empty()) {
        throw DimensionError("reconstruction_loss: masked and target sequences differ in length");
    }
    return ops::cross_entropy(reconstruction_logits(model, input), input.targets.ids, kIgnoreId);
}

double masked_recovery_accuracy(QbsltModel& model, const std::vector<Sample>& samples, double ratio,
                                std::uint64_t seed) {
    NoGradGuard no_grad;
    const bool was_training = model.training();
    model.set_training(false);
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const MaskedTokens input = mask_tokens(samples[i].translation, ratio, mix(seed, i, 0));
        const Tensor logits = reconstruction_logits(model, input);
        const std::size_t vocab = logits.dim(1);
        for (std::size_t t = 0; t < input.targets.size(); ++t) {
            if (input.targets[t] == kIgnoreId) continue;
            std::size_t best = 0;
            for (std::size_t v = 1; v < vocab; ++v)
                if (logits.at(t, v) > logits.at(t, best)) best = v;
            hits += static_cast<int>(best) == input.targets[t];
            ++total;
        }
    }
    model.set_training(was_training);
    return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

RetrievalAccuracy evaluate_retrieval(QbsltModel& model, const std::vector<Sample>& samples, double temperature) {
    if (samples.empty()) throw DataError("retrieval: no samples");
    NoGradGuard no_grad;
    const bool was_training = model.training();
    model.set_training(false);
    std::vector<Tensor> videos, texts;
    for (const auto& s : samples) {
        videos.push_back(as_row(pooled_video(model, s.video)));
        texts.push_back(as_row(pooled_text(model, s.translation)));
    }
    model.set_training(was_training);
    const Tensor logits = alignment_logits(model.video_projection, model.text_projection,
                                           {ops::concat(videos, 0), ops::concat(texts, 0), temperature});
    const std::size_t n = samples.size();
    std::size_t v2t = 0, t2v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t row_best = 0, col_best = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (logits.at(i, j) > logits.at(i, row_best)) row_best = j;
            if (logits.at(j, i) > logits.at(col_best, i)) col_best = j;
        }
        v2t += row_best == i;
        t2v += col_best == i;
    }
    return {static_cast<double>(v2t) / n, static_cast<double>(t2v) / n};
}

Stage1Report train_stage1(QbsltModel& model, const std::vector<Sample>& samples, const Stage1Config& config,
                          std::ostream* log) {
    if (samples.empty()) throw DataError("stage 1: empty dataset");
    if (config.batch == 0) throw ConfigError("stage 1: batch must be >= 1");
    Stage1Report report;
    report.initial = evaluate_retrieval(model, samples, config.temperature);

    model.set_training(true);
    Optimizer optimizer(model.params().trainable(), config.optimizer);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    const std::size_t batch = std::min(config.batch, samples.size());
    Tape& tape = Tape::local();

    for (std::size_t step = 0; step < config.steps; ++step) {
        std::vector<std::size_t> picked;
        // Batches never repeat a sample: a partially consumed epoch is dropped.
        if (cursor + batch > order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        picked.assign(order.begin() + static_cast<long>(cursor), order.begin() + static_cast<long>(cursor + batch));
        cursor += batch;

        std::vector<const VideoFeatureSequence*> frames;
        for (std::size_t i : picked) frames.push_back(&samples[i].video);
        const std::vector<Tensor> features = model.video_features(frames);
        std::vector<Tensor> videos, texts;
        Tensor recon;
        for (std::size_t b = 0; b < picked.size(); ++b) {
            const Sample& s = samples[picked[b]];
            videos.push_back(as_row(pooled_video_features(model, features[b])));
            texts.push_back(as_row(pooled_text(model, s.translation)));
            const MaskedTokens m = mask_tokens(s.translation, config.mask_ratio, mix(config.seed, step, picked[b]));
            Tensor l = reconstruction_loss(model, m);
            recon = recon.defined() ? ops::add(recon, l) : l;
        }
        recon = ops::scale(recon, 1.0 / static_cast<double>(picked.size()));
        const Tensor sim =
            similarity_loss(model, {ops::concat(videos, 0), ops::concat(texts, 0), config.temperature});
        const Tensor total = ops::add(sim, recon);
        check_finite(sim.item(), "similarity loss", step);
        check_finite(recon.item(), "reconstruction loss", step);

        backward(total);
        optimizer.step();
        optimizer.zero_grad();
        tape.clear();

        report.log.push_back({step, sim.item(), recon.item()});
        if (log) *log << step << ' ' << sim.item() << ' ' << recon.item() << '\n';
    }
    report.final = evaluate_retrieval(model, samples, config.temperature);
    return report;
}

}  // namespace qbslt
