// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "qbslt/config.hpp"
#include "qbslt/errors.hpp"
#include "test_support.hpp"

namespace qbslt {
namespace {

std::string message_of(const std::string& text) {
    try {
        RunConfig::parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TEST(Config, DefaultsRoundTrip) {
    const RunConfig c;
    const RunConfig back = RunConfig::parse(c.serialize());
    EXPECT_EQ(back, c);
    EXPECT_EQ(back.serialize(), c.serialize());
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, RandomConfigsRoundTripExactly) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> small(1, 900);
    for (int trial = 0; trial < 200; ++trial) {
        RunConfig c;
        c.apply_seed(rng());
        c.data_dir = "runs/d" + std::to_string(trial);
        c.data.frame_noise = unit(rng) * 3;
        c.data.informativeness = unit(rng);
        c.data.train = small(rng);
        c.stage1.temperature = unit(rng) + 1e-3;
        c.stage1.mask_ratio = unit(rng);
        c.stage1.steps = small(rng);
        c.stage1.optimizer.learning_rate = unit(rng) * 1e-2;
        c.stage1.optimizer.kind = trial % 2 ? OptimizerKind::kAdam : OptimizerKind::kMomentum;
        c.stage2.optimizer.beta2 = unit(rng);
        c.stage2.mode = static_cast<FusionMode>(trial % 4);
        c.stage2.epochs = small(rng);
        c.cold_start = trial % 3 == 0;
        c.ablate_arms = {static_cast<FusionMode>((trial + 1) % 4)};
        c.ablate_seeds = {rng() % 1000, rng() % 1000};
        const RunConfig back = RunConfig::parse(c.serialize());
        ASSERT_EQ(back, c);
        EXPECT_EQ(back.data.frame_noise, c.data.frame_noise);
        EXPECT_EQ(back.stage1.temperature, c.stage1.temperature);
        EXPECT_EQ(back.stage2.optimizer.beta2, c.stage2.optimizer.beta2);
        EXPECT_EQ(back.model.seed, c.model.seed);
        EXPECT_EQ(back.digest(), c.digest());
    }
}

TEST(Config, SeedFansOutButExplicitKeysStillApply) {
    const RunConfig c = RunConfig::parse("stage1.steps = 7\nseed = 42\n# note\n\n");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.data.seed, 42u);
    EXPECT_EQ(c.model.seed, 42u);
    EXPECT_EQ(c.stage1.seed, 42u);
    EXPECT_EQ(c.stage2.seed, 42u);
    EXPECT_EQ(c.stage1.steps, 7u);
}

TEST(Config, UnknownKeyNamesTheLine) {
    const std::string msg = message_of("seed = 3\nstage1.stepz = 4\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("stage1.stepz"), std::string::npos) << msg;
}

TEST(Config, BadValuesAreRejected) {
    EXPECT_NE(message_of("stage1.steps = many\n").find("line 1"), std::string::npos);
    EXPECT_FALSE(message_of("stage1.temperature = 0.1x\n").empty());
    EXPECT_FALSE(message_of("stage2.mode = fancy\n").empty());
    EXPECT_FALSE(message_of("stage2.cold_start = maybe\n").empty());
    EXPECT_FALSE(message_of("just some words\n").empty());
    EXPECT_FALSE(message_of("seed = -1\n").empty());
    EXPECT_THROW(RunConfig::load("/nonexistent/qbslt.cfg"), ConfigError);
}

TEST(Config, ValidateCatchesUnusableCombinations) {
    RunConfig c;
    c.model.heads = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.stage1.temperature = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.ablate_seeds.clear();
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, SaveThenLoadIsIdentity) {
    const auto dir = testing::scratch_dir("config");
    RunConfig c;
    c.apply_seed(77);
    c.stage2.mode = FusionMode::kConcat;
    c.save(dir / "run.cfg");
    EXPECT_EQ(RunConfig::load(dir / "run.cfg"), c);
}

}  // namespace
}  // namespace qbslt
