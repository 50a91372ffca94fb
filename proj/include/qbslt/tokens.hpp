// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace qbslt {

/// Reserved vocabulary ids. They occupy 0..4 in every vocabulary.
namespace token {
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kMask = 3;
inline constexpr int kCls = 4;
inline constexpr int kNumSpecial = 5;
}  // namespace token

/// Target id excluded from cross-entropy means.
inline constexpr int kIgnoreId = -100;

inline bool is_special(int id) { return id >= 0 && id < token::kNumSpecial; }

struct TokenSequence {
    std::vector<int> ids;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
    int operator[](std::size_t i) const { return ids[i]; }
    bool operator==(const TokenSequence&) const = default;

    /// Index of the first occurrence of `id`, or size() when absent.
    std::size_t find(int id) const;
    /// Throws DataError unless every id lies in [0, vocab_size).
    void validate(std::size_t vocab_size) const;
};

/// Per-frame feature vectors, row-major [frames x frame_dim].
struct VideoFeatureSequence {
    std::size_t frame_dim = 0;
    std::vector<float> values;

    std::size_t frames() const { return frame_dim ? values.size() / frame_dim : 0; }
    bool operator==(const VideoFeatureSequence&) const = default;
};

}  // namespace qbslt
