// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace qbslt {

/// 64-bit FNV-1a, used for config and parameter digests.
class Fnv1a {
public:
    void update(std::span<const unsigned char> bytes) {
        for (unsigned char b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view text) {
        update({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
    }
    std::uint64_t value() const { return state_; }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
        return buf;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(std::string_view text) {
    Fnv1a h;
    h.update(text);
    return h.hex();
}

}  // namespace qbslt
