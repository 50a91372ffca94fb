// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic question-based translation corpus and its on-disk format.
//
// Vocabulary layout: ids 0..4 are the special tokens, followed by the
// content words (translation vocabulary), one question word tied to each
// content word, and the distractor words.
//
// Corpus file (one split per file, UTF-8 text):
//   line 1: "qbslt-corpus v1 vocab=<V> frame_dim=<D> count=<R>"
//   then R records, one per line, tab separated:
//     id | "<frames>x<frame_dim>:" + hex of little-endian float32 values
//        | question ids | translation ids | informative bits ("0"/"1" per question token)
// Id lists are space separated.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qbslt/tokens.hpp"

namespace qbslt {

inline constexpr const char* kCorpusFormatVersion = "v1";

struct GeneratorConfig {
    std::size_t content_vocab = 50;
    std::size_t distractor_vocab = 50;
    std::size_t frame_dim = 16;
    std::size_t min_frames = 4;  // frames per gesture, inclusive range
    std::size_t max_frames = 8;
    std::size_t min_length = 3;  // content tokens per sentence, inclusive range
    std::size_t max_length = 8;
    std::size_t categories = 5;
    std::size_t templates = 16;
    double frame_noise = 1.0;
    double informativeness = 0.8;
    std::size_t train = 500;
    std::size_t dev = 100;
    std::size_t test = 100;
    std::uint64_t seed = 1;

    /// Throws ConfigError on any invariant violation.
    void validate() const;
};

class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::size_t content, std::size_t distractor) : content_(content), distractor_(distractor) {}

    std::size_t size() const { return token::kNumSpecial + 2 * content_ + distractor_; }
    std::size_t content_size() const { return content_; }
    std::size_t distractor_size() const { return distractor_; }

    int content_id(std::size_t i) const { return static_cast<int>(token::kNumSpecial + i); }
    int question_id(std::size_t i) const { return static_cast<int>(token::kNumSpecial + content_ + i); }
    int distractor_id(std::size_t i) const { return static_cast<int>(token::kNumSpecial + 2 * content_ + i); }
    bool is_content(int id) const;

    std::string surface(int id) const;

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    std::size_t content_ = 0;
    std::size_t distractor_ = 0;
};

struct Sample {
    std::string id;
    VideoFeatureSequence video;
    TokenSequence question;           // question words followed by EOS
    TokenSequence translation;        // content words followed by EOS
    std::vector<bool> informative;    // per question token; specials are false

    bool operator==(const Sample&) const = default;
    /// Throws DataError when an invariant does not hold.
    void validate(std::size_t vocab_size) const;
};

struct Corpus {
    Vocabulary vocab;
    std::vector<Sample> train, dev, test;
};

/// Deterministic in `config.seed`; samples use independent derived seeds.
Corpus generate_corpus(const GeneratorConfig& config);

/// Content-word prototype vectors [content_vocab][frame_dim] used by the generator.
std::vector<std::vector<float>> gesture_prototypes(const GeneratorConfig& config);

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples, std::size_t vocab_size);
/// Throws DataError naming the record index and field on malformed input.
std::vector<Sample> load_samples(const std::filesystem::path& path);

/// Writes train/dev/test files plus vocab.txt into `dir`.
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);

inline constexpr const char* kTrainFile = "train.qbs";
inline constexpr const char* kDevFile = "dev.qbs";
inline constexpr const char* kTestFile = "test.qbs";
inline constexpr const char* kVocabFile = "vocab.txt";

}  // namespace qbslt
