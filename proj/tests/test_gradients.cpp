// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gradient_suite.hpp"

namespace qbslt::testing {
namespace {

class GradientCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
    for (const auto& [name, instance] : gradient_cases()) {
        if (name != GetParam()) continue;
        for (std::size_t i = 0; i < 100; ++i) {
            ASSERT_LT(run_instance(instance, 2026, i), kFdTolerance) << name << " instance " << i;
        }
        return;
    }
    FAIL() << "no case named " << GetParam();
}

std::vector<std::string> case_names() {
    std::vector<std::string> names;
    for (const auto& c : gradient_cases()) names.push_back(c.first);
    return names;
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientCheck, ::testing::ValuesIn(case_names()),
                         [](const ::testing::TestParamInfo<std::string>& info) { return info.param; });

TEST(FiniteDifference, DetectsAWrongAdjoint) {
    // x * x with the adjoint deliberately omitted for one factor: the checker
    // must report a large error rather than silently passing.
    Tensor x = Tensor::from({1}, {1.3}, true);
    auto f = [&] {
        Tensor y = ops::elementwise_mul(x, Tensor::from({1}, {x[0]}));
        return ops::sum(y);
    };
    EXPECT_GT(fd_relative_error(f, {x}), 0.3);
}

}  // namespace
}  // namespace qbslt::testing
