// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a line-oriented "key = value" file. Blank lines and
// lines starting with '#' are ignored; every key is optional on input and
// every key is written on output, so a saved config is fully resolved.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qbslt/dataset.hpp"
#include "qbslt/model.hpp"
#include "qbslt/stage1.hpp"
#include "qbslt/stage2.hpp"

namespace qbslt {

struct RunConfig {
    std::uint64_t seed = 1;
    std::string data_dir = "data";
    GeneratorConfig data{};
    ModelConfig model{};
    Stage1Config stage1{};
    Stage2Config stage2{};
    bool cold_start = false;
    std::vector<FusionMode> ablate_arms{FusionMode::kSsaw, FusionMode::kConcat, FusionMode::kQuestionOnly,
                                        FusionMode::kVideoOnly};
    std::vector<std::uint64_t> ablate_seeds{1, 2, 3};

    RunConfig();

    /// Copies the global seed into every seeded component.
    void apply_seed(std::uint64_t value);

    /// Throws ConfigError on an unusable combination.
    void validate() const;

    std::string serialize() const;
    /// Throws ConfigError naming the line on an unknown key or bad value.
    static RunConfig parse(const std::string& text);

    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// FNV-1a of serialize().
    std::string digest() const;

    bool operator==(const RunConfig& other) const { return serialize() == other.serialize(); }
};

}  // namespace qbslt
