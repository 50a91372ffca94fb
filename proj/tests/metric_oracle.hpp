// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force BLEU / ROUGE-L used to cross-check the metrics module:
// n-grams counted through std::map, LCS by trying every subsequence.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qbslt/metrics.hpp"

namespace qbslt::oracle {

// Words become ids through one shared table so pairs can be written as text.
inline Sentence words(const std::string& text) {
    static std::map<std::string, int> table;
    Sentence out;
    std::istringstream in(text);
    for (std::string w; in >> w;) out.push_back(table.emplace(w, static_cast<int>(table.size()) + 10).first->second);
    return out;
}

struct Pair {
    const char* hyp;
    const char* ref;
};

// 20 curated pairs: exact, partial, reordered, repeated, short, disjoint.
inline const Pair kPairs[] = {
    {"the cat is on the mat", "the cat is on the mat"},
    {"the the the the the the the", "the cat is on the mat"},
    {"a b c", "a c d"},
    {"the cat sat on the mat today", "the cat is on the mat"},
    {"on the mat the cat is", "the cat is on the mat"},
    {"a a b b c c", "a b c a b c"},
    {"x y z", "p q r s"},
    {"red house by the river bank", "red house near the river"},
    {"one two three four five", "one two three four five six seven"},
    {"one two three four five six seven eight", "one two three"},
    {"sun rain snow wind sun rain", "rain sun wind snow"},
    {"go go go stop", "go stop go stop"},
    {"i see a big dog", "i see a dog"},
    {"big big dog big dog", "big dog big dog"},
    {"morning cloud then rain in the north", "in the north morning cloud then rain"},
    {"cold night", "cold cold night ahead"},
    {"a b a b a b a", "b a b a b a b"},
    {"weather turns warm tomorrow afternoon", "tomorrow afternoon weather turns warm"},
    {"w", "w"},
    {"storm front moves east overnight with heavy rain", "heavy rain storm moves east overnight"},
};

inline std::map<Sentence, std::size_t> count_ngrams(const Sentence& s, std::size_t n) {
    std::map<Sentence, std::size_t> counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Sentence(s.begin() + i, s.begin() + i + n)];
    return counts;
}

inline double oracle_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, std::size_t order) {
    double log_sum = 0;
    double c = 0, r = 0;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        c += static_cast<double>(hyps[k].size());
        r += static_cast<double>(refs[k].size());
    }
    for (std::size_t n = 1; n <= order; ++n) {
        double matched = 0, total = 0;
        for (std::size_t k = 0; k < hyps.size(); ++k) {
            const auto h = count_ngrams(hyps[k], n), ref = count_ngrams(refs[k], n);
            for (const auto& [gram, cnt] : h) {
                total += static_cast<double>(cnt);
                const auto it = ref.find(gram);
                matched += static_cast<double>(std::min(cnt, it == ref.end() ? std::size_t{0} : it->second));
            }
        }
        if (matched == 0) return 0.0;
        log_sum += std::log(matched / total);
    }
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / static_cast<double>(order));
}

inline bool is_subsequence(const Sentence& sub, const Sentence& s) {
    std::size_t j = 0;
    for (int t : s)
        if (j < sub.size() && sub[j] == t) ++j;
    return j == sub.size();
}

// Exhaustive: longest subset of `a` (by bitmask) that is a subsequence of `b`.
inline std::size_t oracle_lcs(const Sentence& a, const Sentence& b) {
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
        Sentence sub;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (mask >> i & 1u) sub.push_back(a[i]);
        if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
    }
    return best;
}

inline double oracle_rouge(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    double sum = 0;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        const double l = static_cast<double>(oracle_lcs(hyps[k], refs[k]));
        const double p = hyps[k].empty() ? 0 : l / static_cast<double>(hyps[k].size());
        const double rc = refs[k].empty() ? 0 : l / static_cast<double>(refs[k].size());
        sum += p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
    }
    return sum / static_cast<double>(hyps.size());
}

inline std::vector<Sentence> column(bool hyp) {
    std::vector<Sentence> out;
    for (const auto& p : kPairs) out.push_back(words(hyp ? p.hyp : p.ref));
    return out;
}

}  // namespace qbslt::oracle
