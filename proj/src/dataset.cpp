// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/dataset.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "qbslt/errors.hpp"

namespace qbslt {

void GeneratorConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("generator: " + msg); };
    if (content_vocab < 1 || distractor_vocab < 1) fail("vocabulary sizes must be >= 1");
    if (frame_dim < 1) fail("frame_dim must be >= 1");
    if (min_frames < 1 || max_frames < min_frames) fail("frames-per-gesture range is empty");
    if (min_length < 1 || max_length < min_length) fail("sentence length range is empty");
    if (categories < 1 || categories > content_vocab) fail("categories must be in [1, content_vocab]");
    if (templates < 1) fail("templates must be >= 1");
    if (!(frame_noise >= 0.0)) fail("frame_noise must be >= 0");
    if (!(informativeness >= 0.0 && informativeness <= 1.0)) fail("informativeness must lie in [0, 1]");
    if (train < 1 || dev < 1 || test < 1) fail("split sizes must be >= 1");
    if (min_length * min_frames < 4) fail("shortest video must have at least 4 frames");
    if (content_vocab / categories < 2) fail("each category needs at least two words");
}

bool Vocabulary::is_content(int id) const {
    return id >= token::kNumSpecial && id < static_cast<int>(token::kNumSpecial + content_);
}

std::string Vocabulary::surface(int id) const {
    static const char* specials[] = {"<pad>", "<bos>", "<eos>", "<mask>", "<cls>"};
    if (id < 0 || static_cast<std::size_t>(id) >= size()) return "<unk>";
    if (is_special(id)) return specials[id];
    auto idx = static_cast<std::size_t>(id - token::kNumSpecial);
    char buf[32];
    if (idx < content_) {
        std::snprintf(buf, sizeof buf, "w%03zu", idx);
    } else if (idx < 2 * content_) {
        std::snprintf(buf, sizeof buf, "q_w%03zu", idx - content_);
    } else {
        std::snprintf(buf, sizeof buf, "x%03zu", idx - 2 * content_);
    }
    return buf;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write vocabulary " + path.string());
    out << "qbslt-vocab v1 content=" << content_ << " distractor=" << distractor_ << '\n';
    for (std::size_t id = 0; id < size(); ++id) out << id << '\t' << surface(static_cast<int>(id)) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("vocabulary not found: " + path.string());
    std::string magic, version, content, distractor;
    in >> magic >> version >> content >> distractor;
    if (magic != "qbslt-vocab" || version != "v1" || !content.starts_with("content=") ||
        !distractor.starts_with("distractor=")) {
        throw DataError("vocabulary " + path.string() + ": unrecognised header");
    }
    try {
        return Vocabulary(std::stoul(content.substr(8)), std::stoul(distractor.substr(11)));
    } catch (const std::exception&) {
        throw DataError("vocabulary " + path.string() + ": bad sizes in header");
    }
}

void Sample::validate(std::size_t vocab_size) const {
    if (video.frame_dim == 0 || video.values.empty() || video.values.size() % video.frame_dim != 0) {
        throw DataError("sample " + id + ": malformed video");
    }
    question.validate(vocab_size);
    translation.validate(vocab_size);
    if (informative.size() != question.size()) throw DataError("sample " + id + ": informative mask length mismatch");
    for (std::size_t i = 0; i < question.size(); ++i) {
        if (informative[i] && is_special(question[i])) {
            throw DataError("sample " + id + ": special token marked informative");
        }
    }
    if (translation.empty() || translation.ids.back() != token::kEos ||
        translation.find(token::kEos) != translation.size() - 1) {
        throw DataError("sample " + id + ": translation must end with exactly one EOS");
    }
    if (translation.size() < 2) throw DataError("sample " + id + ": translation has no content");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
}

constexpr std::uint64_t kGrammarStream = 1, kPrototypeStream = 2;
constexpr std::uint64_t kSplitStream[3] = {11, 12, 13};

struct Grammar {
    std::vector<std::vector<std::size_t>> templates;  // category per slot
    std::vector<std::vector<std::size_t>> members;    // content indices per category
};

Grammar make_grammar(const GeneratorConfig& c) {
    Grammar g;
    g.members.resize(c.categories);
    for (std::size_t i = 0; i < c.content_vocab; ++i) g.members[i % c.categories].push_back(i);
    std::mt19937_64 rng(derive_seed(c.seed, kGrammarStream, 0));
    std::uniform_int_distribution<std::size_t> length(c.min_length, c.max_length);
    std::uniform_int_distribution<std::size_t> category(0, c.categories - 1);
    for (std::size_t t = 0; t < c.templates; ++t) {
        std::vector<std::size_t> slots(length(rng));
        for (auto& s : slots) s = category(rng);
        g.templates.push_back(std::move(slots));
    }
    return g;
}

Sample make_sample(const GeneratorConfig& c, const Vocabulary& vocab, const Grammar& g,
                   const std::vector<std::vector<float>>& prototypes, std::uint64_t seed, std::string id) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_template(0, g.templates.size() - 1);
    const auto& slots = g.templates[pick_template(rng)];

    // Adjacent repeats are excluded so gesture boundaries stay recoverable.
    std::vector<std::size_t> content;
    for (std::size_t slot : slots) {
        const auto& members = g.members[slot];
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        std::size_t word = members[pick(rng)];
        while (!content.empty() && word == content.back()) word = members[pick(rng)];
        content.push_back(word);
    }

    Sample s;
    s.id = std::move(id);
    std::bernoulli_distribution informative(c.informativeness);
    std::uniform_int_distribution<std::size_t> distractor(0, c.distractor_vocab - 1);
    for (std::size_t word : content) {
        s.translation.ids.push_back(vocab.content_id(word));
        const bool keep = informative(rng);
        s.question.ids.push_back(keep ? vocab.question_id(word) : vocab.distractor_id(distractor(rng)));
        s.informative.push_back(keep);
    }
    s.translation.ids.push_back(token::kEos);
    s.question.ids.push_back(token::kEos);
    s.informative.push_back(false);

    s.video.frame_dim = c.frame_dim;
    std::uniform_int_distribution<std::size_t> frames(c.min_frames, c.max_frames);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t word : content) {
        const std::size_t k = frames(rng);
        for (std::size_t f = 0; f < k; ++f) {
            for (std::size_t d = 0; d < c.frame_dim; ++d) {
                s.video.values.push_back(static_cast<float>(prototypes[word][d] + c.frame_noise * noise(rng)));
            }
        }
    }
    return s;
}

}  // namespace

std::vector<std::vector<float>> gesture_prototypes(const GeneratorConfig& c) {
    std::mt19937_64 rng(derive_seed(c.seed, kPrototypeStream, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<float>> protos(c.content_vocab, std::vector<float>(c.frame_dim));
    for (auto& p : protos)
        for (auto& v : p) v = static_cast<float>(normal(rng));
    return protos;
}

Corpus generate_corpus(const GeneratorConfig& config) {
    config.validate();
    Corpus corpus;
    corpus.vocab = Vocabulary(config.content_vocab, config.distractor_vocab);
    const Grammar grammar = make_grammar(config);
    const auto prototypes = gesture_prototypes(config);
    const char* names[3] = {"train", "dev", "test"};
    std::vector<Sample>* splits[3] = {&corpus.train, &corpus.dev, &corpus.test};
    const std::size_t counts[3] = {config.train, config.dev, config.test};
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < counts[s]; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "%s-%05zu", names[s], i);
            splits[s]->push_back(make_sample(config, corpus.vocab, grammar, prototypes,
                                             derive_seed(config.seed, kSplitStream[s], i), id));
        }
    }
    return corpus;
}

namespace {

constexpr char kHex[] = "0123456789abcdef";

std::string join_ids(const TokenSequence& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(seq[i]);
    }
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        parts.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

[[noreturn]] void record_error(const std::filesystem::path& path, std::size_t record, const std::string& field,
                               const std::string& what) {
    throw DataError(path.string() + ": record " + std::to_string(record) + ", field '" + field + "': " + what);
}

std::size_t parse_size(const std::string& text, bool& ok) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    ok = ec == std::errc() && ptr == end && !text.empty();
    return value;
}

TokenSequence parse_ids(const std::string& text, bool& ok) {
    TokenSequence seq;
    ok = !text.empty();
    for (const auto& part : split(text, ' ')) {
        bool good = false;
        const auto v = parse_size(part, good);
        if (!good) {
            ok = false;
            return seq;
        }
        seq.ids.push_back(static_cast<int>(v));
    }
    return seq;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

}  // namespace

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples, std::size_t vocab_size) {
    if (samples.empty()) throw DataError("refusing to write an empty split to " + path.string());
    std::string out = "qbslt-corpus " + std::string(kCorpusFormatVersion) + " vocab=" + std::to_string(vocab_size) +
                      " frame_dim=" + std::to_string(samples.front().video.frame_dim) +
                      " count=" + std::to_string(samples.size()) + "\n";
    for (const auto& s : samples) {
        out += s.id;
        out += '\t';
        out += std::to_string(s.video.frames()) + "x" + std::to_string(s.video.frame_dim) + ":";
        for (float v : s.video.values) {
            const auto bits = std::bit_cast<std::uint32_t>(v);
            for (int b = 0; b < 4; ++b) {
                const unsigned byte = (bits >> (8 * b)) & 0xffu;
                out += kHex[byte >> 4];
                out += kHex[byte & 0xf];
            }
        }
        out += '\t' + join_ids(s.question) + '\t' + join_ids(s.translation) + '\t';
        for (bool bit : s.informative) out += bit ? '1' : '0';
        out += '\n';
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot write corpus " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("corpus file not found: " + path.string());
    std::string header;
    std::getline(file, header);
    const auto head = split(header, ' ');
    if (head.size() < 2 || head[0] != "qbslt-corpus") throw DataError(path.string() + ": not a qbslt corpus file");
    if (head[1] != kCorpusFormatVersion) {
        throw DataError(path.string() + ": unsupported corpus format version '" + head[1] +
                        "' (supported versions: " + kCorpusFormatVersion + ")");
    }
    std::size_t vocab = 0, frame_dim = 0, count = 0;
    bool have[3] = {false, false, false};
    for (std::size_t i = 2; i < head.size(); ++i) {
        const auto eq = head[i].find('=');
        if (eq == std::string::npos) continue;
        const auto key = head[i].substr(0, eq);
        bool ok = false;
        const auto value = parse_size(head[i].substr(eq + 1), ok);
        if (!ok) throw DataError(path.string() + ": bad header field " + head[i]);
        if (key == "vocab") vocab = value, have[0] = true;
        if (key == "frame_dim") frame_dim = value, have[1] = true;
        if (key == "count") count = value, have[2] = true;
    }
    if (!have[0] || !have[1] || !have[2]) throw DataError(path.string() + ": header lacks vocab/frame_dim/count");

    std::vector<Sample> samples;
    std::string line;
    for (std::size_t r = 0; r < count; ++r) {
        if (!std::getline(file, line)) record_error(path, r, "id", "file ends before the declared record count");
        const auto fields = split(line, '\t');
        static const char* names[] = {"id", "frames", "question", "translation", "informative"};
        if (fields.size() != 5) {
            record_error(path, r, fields.size() < 5 ? names[fields.size()] : "informative",
                         "expected 5 tab-separated fields, found " + std::to_string(fields.size()));
        }
        Sample s;
        s.id = fields[0];
        if (s.id.empty()) record_error(path, r, "id", "empty");

        const auto& fr = fields[1];
        const auto colon = fr.find(':');
        const auto x = fr.find('x');
        bool ok_n = false, ok_d = false;
        const auto n = colon == std::string::npos || x > colon ? 0 : parse_size(fr.substr(0, x), ok_n);
        const auto d = colon == std::string::npos || x > colon ? 0 : parse_size(fr.substr(x + 1, colon - x - 1), ok_d);
        if (!ok_n || !ok_d || n == 0 || d != frame_dim) record_error(path, r, "frames", "bad dimensions");
        const std::string hex = fr.substr(colon + 1);
        if (hex.size() != n * d * 8) record_error(path, r, "frames", "payload length does not match dimensions");
        s.video.frame_dim = d;
        s.video.values.resize(n * d);
        for (std::size_t i = 0; i < n * d; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                const int hi = hex_value(hex[i * 8 + 2 * b]), lo = hex_value(hex[i * 8 + 2 * b + 1]);
                if (hi < 0 || lo < 0) record_error(path, r, "frames", "non-hex character");
                bits |= static_cast<std::uint32_t>(hi * 16 + lo) << (8 * b);
            }
            s.video.values[i] = std::bit_cast<float>(bits);
        }

        bool ok = false;
        s.question = parse_ids(fields[2], ok);
        if (!ok) record_error(path, r, "question", "expected space-separated ids");
        s.translation = parse_ids(fields[3], ok);
        if (!ok) record_error(path, r, "translation", "expected space-separated ids");
        for (char ch : fields[4]) {
            if (ch != '0' && ch != '1') record_error(path, r, "informative", "expected only 0/1");
            s.informative.push_back(ch == '1');
        }
        try {
            s.validate(vocab);
        } catch (const DataError& e) {
            record_error(path, r, "record", e.what());
        }
        samples.push_back(std::move(s));
    }
    if (std::getline(file, line) && !line.empty()) {
        throw DataError(path.string() + ": more records than the declared count " + std::to_string(count));
    }
    return samples;
}

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
    std::filesystem::create_directories(dir);
    save_samples(dir / kTrainFile, corpus.train, corpus.vocab.size());
    save_samples(dir / kDevFile, corpus.dev, corpus.vocab.size());
    save_samples(dir / kTestFile, corpus.test, corpus.vocab.size());
    corpus.vocab.save(dir / kVocabFile);
}

Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    corpus.vocab = Vocabulary::load(dir / kVocabFile);
    corpus.train = load_samples(dir / kTrainFile);
    corpus.dev = load_samples(dir / kDevFile);
    corpus.test = load_samples(dir / kTestFile);
    for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test}) {
        for (const auto& s : *split) {
            s.question.validate(corpus.vocab.size());
            s.translation.validate(corpus.vocab.size());
        }
    }
    return corpus;
}

}  // namespace qbslt
