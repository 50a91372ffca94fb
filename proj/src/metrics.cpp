// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace qbslt {

namespace {

void check_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    if (hyps.size() != refs.size()) {
        throw std::invalid_argument("metrics: " + std::to_string(hyps.size()) + " hypotheses for " +
                                    std::to_string(refs.size()) + " references");
    }
    if (hyps.empty()) throw std::invalid_argument("metrics: empty corpus");
}

std::map<Sentence, std::size_t> count_ngrams(const Sentence& s, std::size_t n) {
    std::map<Sentence, std::size_t> counts;
    if (s.size() < n) return counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Sentence(s.begin() + i, s.begin() + i + n)];
    return counts;
}

}  // namespace

NgramPrecision ngram_precision(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, std::size_t n) {
    check_corpus(hyps, refs);
    NgramPrecision p;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        const auto ref_counts = count_ngrams(refs[k], n);
        for (const auto& [gram, count] : count_ngrams(hyps[k], n)) {
            auto it = ref_counts.find(gram);
            p.matched += std::min(count, it == ref_counts.end() ? std::size_t{0} : it->second);
            p.total += count;
        }
    }
    return p;
}

double bleu_n(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, std::size_t n) {
    check_corpus(hyps, refs);
    if (n < 1 || n > 4) throw std::invalid_argument("bleu_n: order must be in 1..4");
    double log_sum = 0.0;
    for (std::size_t order = 1; order <= n; ++order) {
        const auto p = ngram_precision(hyps, refs, order);
        if (p.matched == 0) return 0.0;
        log_sum += std::log(static_cast<double>(p.matched) / static_cast<double>(p.total));
    }
    std::size_t hyp_len = 0, ref_len = 0;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        hyp_len += hyps[k].size();
        ref_len += refs[k].size();
    }
    if (hyp_len == 0) return 0.0;
    const double brevity =
        hyp_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)) : 1.0;
    return brevity * std::exp(log_sum / static_cast<double>(n));
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    check_corpus(hyps, refs);
    double total = 0.0;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        if (hyps[k].empty() || refs[k].empty()) continue;
        const auto lcs = static_cast<double>(lcs_length(hyps[k], refs[k]));
        const double precision = lcs / static_cast<double>(hyps[k].size());
        const double recall = lcs / static_cast<double>(refs[k].size());
        if (precision + recall > 0.0) total += 2.0 * precision * recall / (precision + recall);
    }
    return total / static_cast<double>(hyps.size());
}

ScoreReport score_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    ScoreReport report;
    for (std::size_t n = 1; n <= 4; ++n) report.bleu[n - 1] = bleu_n(hyps, refs, n);
    report.rouge = rouge_l(hyps, refs);
    report.sentences = hyps.size();
    return report;
}

}  // namespace qbslt
