// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "qbslt/embeddings.hpp"
#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"
#include "test_support.hpp"

namespace qbslt {
namespace {

class EmbeddingTest : public ::testing::Test {
protected:
    void TearDown() override { Tape::local().clear(); }
    ParameterStore store;
    Rng rng{11};
};

TEST_F(EmbeddingTest, SinusoidalTableMatchesClosedForm) {
    Tensor p = sinusoidal_positions(3, 4);
    // Pairs (sin, cos) with frequency 10000^(-2i/d).
    for (std::size_t pos = 0; pos < 3; ++pos) {
        for (std::size_t i = 0; i < 2; ++i) {
            const double angle = pos / std::pow(10000.0, 2.0 * i / 4.0);
            EXPECT_NEAR(p.at(pos, 2 * i), std::sin(angle), 1e-15);
            EXPECT_NEAR(p.at(pos, 2 * i + 1), std::cos(angle), 1e-15);
        }
    }
}

TEST_F(EmbeddingTest, RepeatedIdsDifferOnlyByPosition) {
    TextEmbedding emb(store, "t", 10, 6, rng);
    Tensor y = emb(testing::tokens({7, 7}));
    Tensor pos = sinusoidal_positions(2, 6);
    for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_NEAR(y.at(1, j) - y.at(0, j), pos.at(1, j) - pos.at(0, j), 1e-12);
    }
}

TEST_F(EmbeddingTest, UnusedIdsReceiveZeroGradient) {
    TextEmbedding emb(store, "t", 10, 4, rng);
    backward(ops::sum(emb(testing::tokens({2, 5, 2}))));
    const Tensor& table = emb.table();
    for (std::size_t id = 0; id < 10; ++id) {
        double norm = 0;
        for (std::size_t j = 0; j < 4; ++j) norm += std::abs(table.grad()[id * 4 + j]);
        if (id == 2 || id == 5) {
            EXPECT_GT(norm, 0.0) << id;
        } else {
            EXPECT_EQ(norm, 0.0) << id;
        }
    }
}

TEST_F(EmbeddingTest, OutOfRangeIdIsRejected) {
    TextEmbedding emb(store, "t", 10, 4, rng);
    EXPECT_THROW(emb(testing::tokens({3, 10})), DataError);
}

TEST_F(EmbeddingTest, TableRowsAreDistinct) {
    TextEmbedding emb(store, "t", 40, 8, rng);
    const Tensor& table = emb.table();
    for (std::size_t a = 0; a < 40; ++a) {
        for (std::size_t b = a + 1; b < 40; ++b) {
            bool same = true;
            for (std::size_t j = 0; j < 8 && same; ++j) same = table[a * 8 + j] == table[b * 8 + j];
            ASSERT_FALSE(same) << a << " vs " << b;
        }
    }
}

VideoFeatureSequence frames(std::size_t n, std::size_t dim, float value) {
    return {dim, std::vector<float>(n * dim, value)};
}

TEST_F(EmbeddingTest, VideoOutputLengthFollowsTwoStridedPools) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    EXPECT_EQ(emb(frames(8, 3, 0.5f), true).dim(0), 2u);
    EXPECT_EQ(emb(frames(9, 3, 0.5f), true).dim(0), 2u);
    for (std::size_t n = 4; n <= 40; ++n) {
        EXPECT_EQ(VideoEmbedding::output_length(n), (n / 2) / 2);
        EXPECT_EQ(emb(frames(n, 3, 0.1f), false).shape(), (Shape{(n / 2) / 2, 8}));
    }
}

TEST_F(EmbeddingTest, VideoRejectsShortOrMismatchedInput) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    EXPECT_THROW(emb(frames(3, 3, 0.f), true), DataError);
    EXPECT_THROW(emb(frames(8, 4, 0.f), true), DataError);
}

TEST_F(EmbeddingTest, ConstantFramesGiveConstantRowsInInference) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    // Long enough that the zero-padded borders are pooled away from the
    // interior rows we compare.
    Tensor y = emb(frames(64, 3, 0.7f), false);
    for (std::size_t t = 3; t + 3 < y.dim(0); ++t) {
        for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(y.at(t, j), y.at(3, j), 1e-12);
    }
}

TEST_F(EmbeddingTest, TrainingModeUpdatesRunningStatistics) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    const std::string before = store.digest();
    emb(frames(12, 3, 0.2f), false);
    EXPECT_EQ(store.digest(), before);
    emb(frames(12, 3, 0.2f), true);
    EXPECT_NE(store.digest(), before);
}

TEST_F(EmbeddingTest, FrameReadCounterCountsInvocations) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    const std::size_t before = video_frame_reads();
    emb(frames(8, 3, 0.f), true);
    emb(frames(8, 3, 0.f), false);
    EXPECT_EQ(video_frame_reads(), before + 2);
}

VideoFeatureSequence noisy_frames(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng r(seed);
    std::normal_distribution<double> normal;
    VideoFeatureSequence v;
    v.frame_dim = d;
    for (std::size_t i = 0; i < n * d; ++i) v.values.push_back(static_cast<float>(normal(r)));
    return v;
}

TEST_F(EmbeddingTest, BatchInferenceMatchesOneAtATime) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    const auto a = noisy_frames(9, 3, 1), b = noisy_frames(14, 3, 2);
    const auto both = emb({&a, &b}, false);
    ASSERT_EQ(both.size(), 2u);
    const Tensor alone = emb(b, false);
    ASSERT_EQ(both[1].shape(), alone.shape());
    for (std::size_t i = 0; i < alone.numel(); ++i) EXPECT_EQ(both[1][i], alone[i]);
}

TEST_F(EmbeddingTest, TrainingBatchSharesNormalisationStatistics) {
    VideoEmbedding emb(store, "v", 3, 8, rng);
    const auto a = noisy_frames(9, 3, 1), b = noisy_frames(14, 3, 2), c = noisy_frames(14, 3, 3);
    const Tensor with_b = emb({&a, &b}, true).front();
    const Tensor with_c = emb({&a, &c}, true).front();
    double diff = 0;
    for (std::size_t i = 0; i < with_b.numel(); ++i) diff += std::abs(with_b[i] - with_c[i]);
    EXPECT_GT(diff, 1e-6);
    EXPECT_THROW(emb(std::vector<const VideoFeatureSequence*>{}, true), DataError);
}

}  // namespace
}  // namespace qbslt
