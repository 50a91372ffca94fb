// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace qbslt {

/// Shape or axis violation in a tensor operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corpus, vocabulary or checkpoint content that cannot be used. CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A checkpoint path that does not exist or does not match the model.
class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite loss or gradient during training. CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qbslt
