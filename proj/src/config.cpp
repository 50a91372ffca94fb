// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "qbslt/digest.hpp"
#include "qbslt/errors.hpp"

namespace qbslt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

double parse_double(const std::string& text) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("expected a number, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError("expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty item in list '" + text + "'");
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field size_field(const char* key, T RunConfig::*section, std::size_t T::*member) {
    return {key, [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
            [=](RunConfig& c, const std::string& v) { c.*section.*member = parse_u64(v); }};
}

template <typename T>
Field double_field(const char* key, T RunConfig::*section, double T::*member) {
    return {key, [=](const RunConfig& c) { return format_double(c.*section.*member); },
            [=](RunConfig& c, const std::string& v) { c.*section.*member = parse_double(v); }};
}

void optimizer_fields(std::vector<Field>& f, const std::string& prefix, OptimizerConfig& (*pick)(RunConfig&),
                      const OptimizerConfig& (*cpick)(const RunConfig&)) {
    auto key = [&](const char* name) { return prefix + name; };
    f.push_back({key("optimizer"), [=](const RunConfig& c) { return to_string(cpick(c).kind); },
                 [=](RunConfig& c, const std::string& v) { pick(c).kind = parse_optimizer_kind(v); }});
    using Member = double OptimizerConfig::*;
    const std::pair<const char*, Member> doubles[] = {{"learning_rate", &OptimizerConfig::learning_rate},
                                                      {"momentum", &OptimizerConfig::momentum},
                                                      {"clip_norm", &OptimizerConfig::clip_norm},
                                                      {"beta1", &OptimizerConfig::beta1},
                                                      {"beta2", &OptimizerConfig::beta2}};
    for (const auto& [name, member] : doubles) {
        f.push_back({key(name), [=](const RunConfig& c) { return format_double(cpick(c).*member); },
                     [=](RunConfig& c, const std::string& v) { pick(c).*member = parse_double(v); }});
    }
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& v) { c.apply_seed(parse_u64(v)); }});
        f.push_back({"data.dir", [](const RunConfig& c) { return c.data_dir; },
                     [](RunConfig& c, const std::string& v) { c.data_dir = v; }});
        using G = GeneratorConfig;
        f.push_back(size_field("data.content_vocab", &RunConfig::data, &G::content_vocab));
        f.push_back(size_field("data.distractor_vocab", &RunConfig::data, &G::distractor_vocab));
        f.push_back(size_field("data.frame_dim", &RunConfig::data, &G::frame_dim));
        f.push_back(size_field("data.min_frames", &RunConfig::data, &G::min_frames));
        f.push_back(size_field("data.max_frames", &RunConfig::data, &G::max_frames));
        f.push_back(size_field("data.min_length", &RunConfig::data, &G::min_length));
        f.push_back(size_field("data.max_length", &RunConfig::data, &G::max_length));
        f.push_back(size_field("data.categories", &RunConfig::data, &G::categories));
        f.push_back(size_field("data.templates", &RunConfig::data, &G::templates));
        f.push_back(double_field("data.frame_noise", &RunConfig::data, &G::frame_noise));
        f.push_back(double_field("data.informativeness", &RunConfig::data, &G::informativeness));
        f.push_back(size_field("data.train", &RunConfig::data, &G::train));
        f.push_back(size_field("data.dev", &RunConfig::data, &G::dev));
        f.push_back(size_field("data.test", &RunConfig::data, &G::test));
        using M = ModelConfig;
        f.push_back(size_field("model.d_model", &RunConfig::model, &M::d_model));
        f.push_back(size_field("model.heads", &RunConfig::model, &M::heads));
        f.push_back(size_field("model.d_ff", &RunConfig::model, &M::d_ff));
        f.push_back(size_field("model.encoder_layers", &RunConfig::model, &M::encoder_layers));
        f.push_back(size_field("model.decoder_layers", &RunConfig::model, &M::decoder_layers));
        using S1 = Stage1Config;
        f.push_back(size_field("stage1.steps", &RunConfig::stage1, &S1::steps));
        f.push_back(size_field("stage1.batch", &RunConfig::stage1, &S1::batch));
        f.push_back(double_field("stage1.temperature", &RunConfig::stage1, &S1::temperature));
        f.push_back(double_field("stage1.mask_ratio", &RunConfig::stage1, &S1::mask_ratio));
        optimizer_fields(
            f, "stage1.", [](RunConfig& c) -> OptimizerConfig& { return c.stage1.optimizer; },
            [](const RunConfig& c) -> const OptimizerConfig& { return c.stage1.optimizer; });
        using S2 = Stage2Config;
        f.push_back({"stage2.mode", [](const RunConfig& c) { return to_string(c.stage2.mode); },
                     [](RunConfig& c, const std::string& v) { c.stage2.mode = parse_fusion_mode(v); }});
        f.push_back(size_field("stage2.epochs", &RunConfig::stage2, &S2::epochs));
        f.push_back(size_field("stage2.batch", &RunConfig::stage2, &S2::batch));
        f.push_back(size_field("stage2.max_len", &RunConfig::stage2, &S2::max_len));
        optimizer_fields(
            f, "stage2.", [](RunConfig& c) -> OptimizerConfig& { return c.stage2.optimizer; },
            [](const RunConfig& c) -> const OptimizerConfig& { return c.stage2.optimizer; });
        f.push_back({"stage2.cold_start", [](const RunConfig& c) { return std::string(c.cold_start ? "true" : "false"); },
                     [](RunConfig& c, const std::string& v) { c.cold_start = parse_bool(v); }});
        f.push_back({"ablate.arms",
                     [](const RunConfig& c) {
                         std::string out;
                         for (auto m : c.ablate_arms) out += (out.empty() ? "" : ",") + to_string(m);
                         return out;
                     },
                     [](RunConfig& c, const std::string& v) {
                         c.ablate_arms.clear();
                         for (const auto& item : split_list(v)) c.ablate_arms.push_back(parse_fusion_mode(item));
                     }});
        f.push_back({"ablate.seeds",
                     [](const RunConfig& c) {
                         std::string out;
                         for (auto s : c.ablate_seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
                         return out;
                     },
                     [](RunConfig& c, const std::string& v) {
                         c.ablate_seeds.clear();
                         for (const auto& item : split_list(v)) c.ablate_seeds.push_back(parse_u64(item));
                     }});
        return f;
    }();
    return table;
}

}  // namespace

RunConfig::RunConfig() {
    apply_seed(seed);
}

void RunConfig::apply_seed(std::uint64_t value) {
    seed = value;
    data.seed = value;
    model.seed = value;
    stage1.seed = value;
    stage2.seed = value;
}

void RunConfig::validate() const {
    data.validate();
    if (model.d_model == 0 || model.heads == 0 || model.d_model % model.heads != 0) {
        throw ConfigError("model.d_model must be a positive multiple of model.heads");
    }
    if (model.d_ff == 0 || model.encoder_layers == 0 || model.decoder_layers == 0) {
        throw ConfigError("model sizes must be >= 1");
    }
    if (stage1.batch == 0) throw ConfigError("stage1.batch must be >= 1");
    if (!(stage1.temperature > 0.0)) throw ConfigError("stage1.temperature must be positive");
    if (!(stage1.mask_ratio >= 0.0 && stage1.mask_ratio <= 1.0)) throw ConfigError("stage1.mask_ratio must lie in [0, 1]");
    if (stage2.batch == 0 || stage2.epochs == 0 || stage2.max_len == 0) {
        throw ConfigError("stage2.batch, stage2.epochs and stage2.max_len must be >= 1");
    }
    for (const auto* opt : {&stage1.optimizer, &stage2.optimizer}) {
        if (!(opt->learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    }
    if (ablate_arms.empty() || ablate_seeds.empty()) throw ConfigError("ablate.arms and ablate.seeds must be non-empty");
}

std::string RunConfig::serialize() const {
    std::string out = "# qbslt run config\n";
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    // The seed fans out into the component seeds, so it is applied first.
    std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> entries;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        entries.push_back({number, {trim(t.substr(0, eq)), trim(t.substr(eq + 1))}});
    }
    std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.second.first == "seed"; });
    for (const auto& [n, kv] : entries) {
        const auto& [key, value] = kv;
        const Field* field = nullptr;
        for (const auto& f : fields())
            if (key == f.key) field = &f;
        if (!field) throw ConfigError("config line " + std::to_string(n) + ": unknown key '" + key + "'");
        try {
            field->set(c, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(n) + " (" + key + "): " + e.what());
        }
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config not found: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write config " + path.string());
    out << serialize();
}

std::string RunConfig::digest() const {
    return fnv1a_hex(serialize());
}

}  // namespace qbslt
