// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named parameter collection and the binary checkpoint format.
//
// Checkpoint layout (all integers little-endian):
//   magic "QBSLTCKP" | u32 version | u32 record count
//   per record: u32 name length | name bytes | u32 rank | u64 extent * rank
//               | f64 value * numel
// Records are written in registration order, so identical stores produce
// identical bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "qbslt/tensor.hpp"

namespace qbslt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;
    bool trainable = true;
};

class ParameterStore {
public:
    /// Registers `tensor` under a unique `name`. Trainable tensors get requires_grad.
    Tensor add(const std::string& name, Tensor tensor, bool trainable = true);

    bool contains(const std::string& name) const { return index_.contains(name); }
    Tensor get(const std::string& name) const;

    const std::vector<NamedTensor>& entries() const { return entries_; }
    std::vector<Tensor> trainable() const;
    std::size_t parameter_count() const;

    void zero_grad();

    /// Digest of one tensor's shape and values.
    std::string digest(const std::string& name) const;
    /// Digest over every record, in order.
    std::string digest() const;

    void save(const std::filesystem::path& path) const;

    /// Copies values for every checkpoint record whose name starts with one of
    /// `prefixes` (all records when empty). Every matching name must exist in
    /// the store with the same shape. Returns the names that were loaded.
    std::vector<std::string> load(const std::filesystem::path& path, const std::vector<std::string>& prefixes = {});

    /// Deep copy of all values, for best-checkpoint snapshots.
    std::vector<Tensor> snapshot() const;
    void restore(const std::vector<Tensor>& values);

private:
    std::vector<NamedTensor> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct CheckpointRecord {
    std::string name;
    Tensor tensor;
};

/// Reads every record of a checkpoint file. Throws CheckpointError on a
/// missing file, bad magic, unknown version or truncation.
std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);

}  // namespace qbslt
