// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus BLEU-1..4 (single reference, no smoothing) and ROUGE-L F1.
// Scores are fractions in [0, 1].

#pragma once

#include <cstddef>
#include <vector>

namespace qbslt {

using Sentence = std::vector<int>;

struct NgramPrecision {
    std::size_t matched = 0;  // clipped counts
    std::size_t total = 0;    // hypothesis n-grams
};

/// Corpus-level modified n-gram precision of a single order.
NgramPrecision ngram_precision(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, std::size_t n);

/// Geometric mean of precisions 1..n times the brevity penalty.
double bleu_n(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, std::size_t n);

/// Longest common subsequence length.
std::size_t lcs_length(const Sentence& a, const Sentence& b);

/// Mean sentence-level ROUGE-L F1.
double rouge_l(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

struct ScoreReport {
    double bleu[4] = {0, 0, 0, 0};
    double rouge = 0.0;
    std::size_t sentences = 0;
};

ScoreReport score_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

}  // namespace qbslt
