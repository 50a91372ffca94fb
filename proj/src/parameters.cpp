// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/parameters.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qbslt/digest.hpp"
#include "qbslt/errors.hpp"

namespace qbslt {

namespace {

constexpr char kMagic[8] = {'Q', 'B', 'S', 'L', 'T', 'C', 'K', 'P'};

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double value) {
    put_le(out, std::bit_cast<std::uint64_t>(value));
}

class Reader {
public:
    Reader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string get_bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw CheckpointError("checkpoint " + source_ + ": truncated while reading " + what);
        }
    }

    std::string bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

void encode_tensor(std::string& out, const Tensor& t) {
    put_le(out, static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) put_le(out, static_cast<std::uint64_t>(extent));
    for (double v : t.data()) put_f64(out, v);
}

}  // namespace

Tensor ParameterStore::add(const std::string& name, Tensor tensor, bool trainable) {
    if (index_.contains(name)) throw std::logic_error("duplicate parameter name: " + name);
    tensor.set_requires_grad(trainable);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, tensor, trainable});
    return tensor;
}

Tensor ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw CheckpointError("unknown parameter: " + name);
    return entries_[it->second].tensor;
}

std::vector<Tensor> ParameterStore::trainable() const {
    std::vector<Tensor> out;
    for (const auto& e : entries_)
        if (e.trainable) out.push_back(e.tensor);
    return out;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.trainable) n += e.tensor.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

std::string ParameterStore::digest(const std::string& name) const {
    std::string bytes;
    encode_tensor(bytes, get(name));
    return fnv1a_hex(bytes);
}

std::string ParameterStore::digest() const {
    Fnv1a h;
    for (const auto& e : entries_) {
        std::string bytes = e.name;
        encode_tensor(bytes, e.tensor);
        h.update(bytes);
    }
    return h.hex();
}

void ParameterStore::save(const std::filesystem::path& path) const {
    std::string out(kMagic, sizeof kMagic);
    put_le(out, kCheckpointVersion);
    put_le(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        put_le(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        encode_tensor(out, e.tensor);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot write checkpoint " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError("failed writing checkpoint " + path.string());
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw CheckpointError("checkpoint not found: " + path.string());
    Reader in(std::string(std::istreambuf_iterator<char>(file), {}), path.string());

    if (in.get_bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
        throw CheckpointError("checkpoint " + path.string() + ": bad magic");
    }
    const auto version = in.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version) +
                              " (supported: " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto count = in.get<std::uint32_t>("record count");
    std::vector<CheckpointRecord> records;
    records.reserve(count);
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto name_len = in.get<std::uint32_t>("name length");
        std::string name = in.get_bytes(name_len, "name");
        const auto rank = in.get<std::uint32_t>("rank");
        if (rank == 0 || rank > 8) throw CheckpointError("checkpoint " + path.string() + ": bad rank for " + name);
        Shape shape(rank);
        for (auto& extent : shape) extent = in.get<std::uint64_t>("extent");
        std::vector<double> values(shape_numel(shape));
        for (auto& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>("values"));
        records.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
    }
    if (!in.done()) throw CheckpointError("checkpoint " + path.string() + ": trailing bytes");
    return records;
}

std::vector<std::string> ParameterStore::load(const std::filesystem::path& path,
                                              const std::vector<std::string>& prefixes) {
    auto records = read_checkpoint(path);
    std::vector<std::string> loaded;
    for (auto& rec : records) {
        bool wanted = prefixes.empty();
        for (const auto& p : prefixes) wanted = wanted || rec.name.starts_with(p);
        if (!wanted) continue;
        if (!contains(rec.name)) throw CheckpointError("checkpoint parameter not in model: " + rec.name);
        Tensor target = get(rec.name);
        if (target.shape() != rec.tensor.shape()) {
            throw CheckpointError("checkpoint parameter " + rec.name + " has shape " + shape_str(rec.tensor.shape()) +
                                  ", model expects " + shape_str(target.shape()));
        }
        target.assign(rec.tensor);
        loaded.push_back(rec.name);
    }
    return loaded;
}

std::vector<Tensor> ParameterStore::snapshot() const {
    std::vector<Tensor> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor.clone());
    return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
    if (values.size() != entries_.size()) throw std::logic_error("restore: snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) entries_[i].tensor.assign(values[i]);
}

}  // namespace qbslt
