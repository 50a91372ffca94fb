// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"
#include "qbslt/optim.hpp"
#include "qbslt/parameters.hpp"
#include "test_support.hpp"

namespace qbslt {
namespace {

using testing::random_tensor;

class TensorTest : public ::testing::Test {
protected:
    void TearDown() override { Tape::local().clear(); }
};

TEST_F(TensorTest, ShapeDataAndGradAgree) {
    Tensor t = Tensor::zeros({2, 3, 4}, true);
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_EQ(t.grad().size(), 24u);
    EXPECT_EQ(shape_str(t.shape()), "[2x3x4]");
    EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
    EXPECT_THROW(Tensor::zeros({2, 3}).item(), DimensionError);
}

TEST_F(TensorTest, HandlesAliasAndCloneCopies) {
    Tensor a = Tensor::from({2}, {1, 2});
    Tensor alias = a;
    Tensor copy = a.clone();
    a[0] = 9;
    EXPECT_EQ(alias[0], 9);
    EXPECT_EQ(copy[0], 1);
    EXPECT_TRUE(alias.same_storage(a));
    EXPECT_FALSE(copy.same_storage(a));
}

TEST_F(TensorTest, MatmulValuesAndShapeErrors) {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = ops::matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 2}));
    EXPECT_EQ(c.at(0, 0), 58);
    EXPECT_EQ(c.at(0, 1), 64);
    EXPECT_EQ(c.at(1, 0), 139);
    EXPECT_EQ(c.at(1, 1), 154);
    EXPECT_THROW(ops::matmul(a, a), DimensionError);
    EXPECT_THROW(ops::add(a, b), DimensionError);
    EXPECT_THROW(ops::softmax(a, 2), DimensionError);
}

TEST_F(TensorTest, SoftmaxRowsSumToOneAndResistOverflow) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor x = random_tensor({3, 5}, rng, 50.0);
        Tensor p = ops::softmax(x, 1);
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < 5; ++j) {
                ASSERT_GE(p.at(i, j), 0.0);
                s += p.at(i, j);
            }
            ASSERT_NEAR(s, 1.0, 1e-12);
        }
    }
    Tensor big = Tensor::from({1, 2}, {1000.0, 1000.0});
    Tensor p = ops::softmax(big, 1);
    EXPECT_DOUBLE_EQ(p[0], 0.5);
}

TEST_F(TensorTest, SigmoidStaysStrictlyInsideUnitInterval) {
    Rng rng(2);
    Tensor x = random_tensor({1, 1000}, rng, 10.0);
    Tensor y = ops::sigmoid(x);
    for (double v : y.data()) {
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
    EXPECT_DOUBLE_EQ(ops::sigmoid(Tensor::from({1}, {0.0}))[0], 0.5);
}

TEST_F(TensorTest, LayerNormMatchesHandComputation) {
    Tensor x = Tensor::from({1, 4}, {1, 2, 3, 4});
    Tensor y = ops::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}), 1e-5);
    const double mean = 2.5, var = 1.25;
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y[j], (x[j] - mean) / std::sqrt(var + 1e-5), 1e-12);
}

TEST_F(TensorTest, CrossEntropyIgnoresRowsAndHasEmptyMeanZero) {
    Tensor logits = Tensor::zeros({2, 4}, true);
    Tensor loss = ops::cross_entropy(logits, {1, kIgnoreId}, kIgnoreId);
    EXPECT_NEAR(loss.item(), std::log(4.0), 1e-12);
    Tensor none = ops::cross_entropy(logits, {kIgnoreId, kIgnoreId}, kIgnoreId);
    EXPECT_EQ(none.item(), 0.0);
    backward(none);
    for (double g : logits.grad()) EXPECT_EQ(g, 0.0);
    EXPECT_THROW(ops::cross_entropy(logits, {7, 0}, kIgnoreId), DimensionError);
}

TEST_F(TensorTest, NonParticipatingTensorsKeepZeroGradient) {
    Tensor a = Tensor::from({2}, {1, 2}, true);
    Tensor unused = Tensor::from({2}, {3, 4}, true);
    Tensor other = ops::sum(ops::elementwise_mul(unused, unused));
    (void)other;
    backward(ops::sum(ops::scale(a, 3.0)));
    EXPECT_EQ(a.grad()[0], 3.0);
    EXPECT_EQ(unused.grad()[0], 0.0);
    EXPECT_EQ(unused.grad()[1], 0.0);
}

TEST_F(TensorTest, LeafGradientsAccumulateAcrossBackwardCalls) {
    Tensor a = Tensor::from({1}, {2.0}, true);
    backward(ops::sum(ops::elementwise_mul(a, a)));
    Tape::local().clear();
    backward(ops::sum(ops::elementwise_mul(a, a)));
    EXPECT_EQ(a.grad()[0], 8.0);
    a.zero_grad();
    EXPECT_EQ(a.grad()[0], 0.0);
}

TEST_F(TensorTest, IntermediateGradientsResetBetweenBackwardCalls) {
    // Backpropagating the same loss twice on one tape must not double the
    // intermediate adjoints, only the leaf accumulation.
    Tensor a = Tensor::from({1}, {1.5}, true);
    Tensor loss = ops::sum(ops::scale(ops::elementwise_mul(a, a), 2.0));
    backward(loss);
    backward(loss);
    EXPECT_DOUBLE_EQ(a.grad()[0], 2 * 4.0 * 1.5);
}

TEST_F(TensorTest, NoGradGuardSuspendsRecording) {
    Tensor a = Tensor::from({1}, {1.0}, true);
    const std::size_t before = Tape::local().size();
    {
        NoGradGuard guard;
        Tensor b = ops::scale(a, 2.0);
        EXPECT_FALSE(b.requires_grad());
    }
    EXPECT_EQ(Tape::local().size(), before);
    EXPECT_TRUE(Tape::local().recording());
}

TEST_F(TensorTest, BackwardIsBitReproducible) {
    auto run = [] {
        Rng rng(9);
        Tensor w = random_tensor({4, 3}, rng, 1.0, true);
        Tensor x = random_tensor({5, 4}, rng);
        Tensor loss = ops::cross_entropy(ops::matmul(x, w), {0, 1, 2, 1, 0}, kIgnoreId);
        backward(loss);
        std::vector<double> g(w.grad().begin(), w.grad().end());
        Tape::local().clear();
        return g;
    };
    EXPECT_EQ(run(), run());
}

TEST_F(TensorTest, BackwardRejectsNonScalarLoss) {
    Tensor a = Tensor::from({2}, {1, 2}, true);
    EXPECT_THROW(backward(ops::scale(a, 1.0)), DimensionError);
}

TEST_F(TensorTest, L2NormalizeRejectsZeroRows) {
    EXPECT_THROW(ops::l2_normalize_rows(Tensor::zeros({1, 3})), DimensionError);
    Tensor y = ops::l2_normalize_rows(Tensor::from({1, 2}, {3, 4}));
    EXPECT_DOUBLE_EQ(y[0], 0.6);
    EXPECT_DOUBLE_EQ(y[1], 0.8);
}

TEST_F(TensorTest, ConvOfConstantSignalIsConstantAwayFromEdges) {
    Tensor x = Tensor::full({9, 1}, 2.0);
    Tensor w = Tensor::full({5, 1, 1}, 1.0);
    Tensor y = ops::conv1d(x, w, Tensor::zeros({1}));
    for (std::size_t t = 2; t < 7; ++t) EXPECT_DOUBLE_EQ(y[t], 10.0);
    EXPECT_DOUBLE_EQ(y[0], 6.0);  // zero padding at the edge
    EXPECT_THROW(ops::conv1d(x, Tensor::full({4, 1, 1}, 1.0), Tensor::zeros({1})), DimensionError);
}

TEST_F(TensorTest, OptimizerRejectsNonFiniteGradients) {
    Tensor p = Tensor::from({1}, {1.0}, true);
    p.grad()[0] = std::nan("");
    Optimizer opt({p}, OptimizerConfig{});
    EXPECT_THROW(opt.step(), NumericError);
}

TEST_F(TensorTest, MomentumStepMatchesHandUpdate) {
    Tensor p = Tensor::from({1}, {1.0}, true);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.clip_norm = 0.0;
    Optimizer opt({p}, cfg);
    p.grad()[0] = 2.0;
    opt.step();
    EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.1 * 2.0);
    opt.step();  // velocity 0.9 * 2 + 2
    EXPECT_DOUBLE_EQ(p[0], 0.8 - 0.1 * 3.8);
}

TEST_F(TensorTest, GradientClipBoundsTheGlobalNorm) {
    Tensor p = Tensor::from({2}, {0.0, 0.0}, true);
    OptimizerConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.momentum = 0.0;
    cfg.clip_norm = 1.0;
    Optimizer opt({p}, cfg);
    p.grad()[0] = 3.0;
    p.grad()[1] = 4.0;
    EXPECT_DOUBLE_EQ(opt.step(), 5.0);
    EXPECT_NEAR(p[0], -0.6, 1e-15);
    EXPECT_NEAR(p[1], -0.8, 1e-15);
}

TEST_F(TensorTest, CheckpointRoundTripAndErrors) {
    auto dir = testing::scratch_dir("ckpt");
    ParameterStore store;
    Rng rng(4);
    store.add("a.w", random_tensor({2, 3}, rng));
    store.add("b.stat", Tensor::full({3}, 1.5), false);
    store.save(dir / "x.ckpt");

    ParameterStore other;
    other.add("a.w", Tensor::zeros({2, 3}));
    other.add("b.stat", Tensor::zeros({3}), false);
    EXPECT_EQ(other.load(dir / "x.ckpt").size(), 2u);
    EXPECT_EQ(other.digest(), store.digest());

    ParameterStore partial;
    partial.add("a.w", Tensor::zeros({2, 3}));
    EXPECT_EQ(partial.load(dir / "x.ckpt", {"a."}), (std::vector<std::string>{"a.w"}));
    EXPECT_THROW(partial.load(dir / "x.ckpt"), CheckpointError);

    ParameterStore wrong;
    wrong.add("a.w", Tensor::zeros({3, 2}));
    EXPECT_THROW(wrong.load(dir / "x.ckpt", {"a."}), CheckpointError);
    EXPECT_THROW(other.load(dir / "missing.ckpt"), CheckpointError);

    std::string bytes = testing::slurp(dir / "x.ckpt");
    std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
    EXPECT_THROW(read_checkpoint(dir / "trunc.ckpt"), CheckpointError);
    bytes[8] = 7;  // version field
    std::ofstream(dir / "v7.ckpt", std::ios::binary) << bytes;
    try {
        read_checkpoint(dir / "v7.ckpt");
        FAIL() << "version 7 accepted";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("supported: 1"), std::string::npos);
    }
}

}  // namespace
}  // namespace qbslt
