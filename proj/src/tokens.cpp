// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/tokens.hpp"

#include <algorithm>

#include "qbslt/errors.hpp"

namespace qbslt {

std::size_t TokenSequence::find(int id) const {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
}

void TokenSequence::validate(std::size_t vocab_size) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab_size) {
            throw DataError("token id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                            " outside vocabulary of size " + std::to_string(vocab_size));
        }
    }
}

}  // namespace qbslt
