// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "qbslt/dataset.hpp"
#include "qbslt/errors.hpp"
#include "test_support.hpp"

namespace qbslt {
namespace {

std::vector<const Sample*> all_samples(const Corpus& c) {
    std::vector<const Sample*> out;
    for (const auto* split : {&c.train, &c.dev, &c.test})
        for (const auto& s : *split) out.push_back(&s);
    return out;
}

TEST(Dataset, SamplesSatisfyTheirInvariants) {
    const Corpus c = generate_corpus(GeneratorConfig{});
    EXPECT_EQ(c.train.size(), 500u);
    EXPECT_EQ(c.dev.size(), 100u);
    EXPECT_EQ(c.test.size(), 100u);
    for (const Sample* s : all_samples(c)) {
        EXPECT_NO_THROW(s->validate(c.vocab.size()));
        const std::size_t words = s->translation.size() - 1;
        EXPECT_GE(words, 3u);
        EXPECT_LE(words, 8u);
        EXPECT_EQ(s->question.size(), s->translation.size());
        EXPECT_EQ(s->question.ids.back(), token::kEos);
        EXPECT_FALSE(s->informative.back());
        EXPECT_GE(s->video.frames(), GeneratorConfig{}.min_frames * words);
        EXPECT_LE(s->video.frames(), GeneratorConfig{}.max_frames * words);
    }
}

TEST(Dataset, InformativenessExtremes) {
    GeneratorConfig g = testing::tiny_generator(30);
    g.informativeness = 0.0;
    const Corpus none = generate_corpus(g);
    for (const Sample* s : all_samples(none)) {
        for (bool b : s->informative) EXPECT_FALSE(b);
    }
    g.informativeness = 1.0;
    const Corpus c = generate_corpus(g);
    for (const Sample* s : all_samples(c)) {
        for (std::size_t i = 0; i + 1 < s->question.size(); ++i) {
            EXPECT_TRUE(s->informative[i]);
            // Each question word is the one tied to the content word in its slot.
            EXPECT_EQ(s->question[i] - s->translation[i], static_cast<int>(c.vocab.content_size()));
        }
    }
}

TEST(Dataset, InformativeRateTracksConfiguredProbability) {
    GeneratorConfig g;
    g.informativeness = 0.8;
    std::size_t hits = 0, slots = 0;
    const Corpus c = generate_corpus(g);
    for (const Sample* s : all_samples(c)) {
        for (std::size_t i = 0; i + 1 < s->informative.size(); ++i) {
            hits += s->informative[i];
            ++slots;
        }
    }
    // Binomial sd at ~3900 slots is ~0.0064.
    EXPECT_NEAR(static_cast<double>(hits) / static_cast<double>(slots), 0.8, 0.03);
}

TEST(Dataset, SameSeedWritesByteIdenticalFiles) {
    const auto a = testing::scratch_dir("corpus-a"), b = testing::scratch_dir("corpus-b");
    save_corpus(a, generate_corpus(testing::tiny_generator(20, 9)));
    save_corpus(b, generate_corpus(testing::tiny_generator(20, 9)));
    for (const char* f : {kTrainFile, kDevFile, kTestFile, kVocabFile}) {
        EXPECT_EQ(testing::slurp(a / f), testing::slurp(b / f)) << f;
    }
    save_corpus(b, generate_corpus(testing::tiny_generator(20, 10)));
    EXPECT_NE(testing::slurp(a / kTrainFile), testing::slurp(b / kTrainFile));
}

TEST(Dataset, RoundTripReproducesEveryField) {
    const auto dir = testing::scratch_dir("roundtrip");
    GeneratorConfig g = testing::tiny_generator(10);
    g.frame_noise = 0.37;
    const Corpus c = generate_corpus(g);
    save_corpus(dir, c);
    const Corpus back = load_corpus(dir);
    ASSERT_EQ(back.train.size(), 10u);
    EXPECT_EQ(back.train, c.train);
    EXPECT_EQ(back.dev, c.dev);
    EXPECT_EQ(back.test, c.test);
    EXPECT_EQ(back.vocab.size(), c.vocab.size());
    for (int id = 0; id < static_cast<int>(c.vocab.size()); ++id) EXPECT_EQ(back.vocab.surface(id), c.vocab.surface(id));
}

std::string error_of(const std::filesystem::path& p) {
    try {
        load_samples(p);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

TEST(Dataset, TruncatedFileNamesTheBrokenRecord) {
    const auto dir = testing::scratch_dir("truncated");
    save_samples(dir / "x.qbs", generate_corpus(testing::tiny_generator(6)).train, 100);
    std::string text = testing::slurp(dir / "x.qbs");
    // Cut record 3 in the middle of its frame payload.
    std::size_t pos = 0;
    for (int line = 0; line < 4; ++line) pos = text.find('\n', pos) + 1;
    text.resize(pos + 20);
    std::ofstream(dir / "x.qbs", std::ios::binary | std::ios::trunc) << text;
    const std::string msg = error_of(dir / "x.qbs");
    EXPECT_NE(msg.find("record 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("field"), std::string::npos) << msg;

    text.resize(pos);
    std::ofstream(dir / "x.qbs", std::ios::binary | std::ios::trunc) << text;
    EXPECT_NE(error_of(dir / "x.qbs").find("record 3"), std::string::npos);
}

TEST(Dataset, MalformedFieldsAreReportedByName) {
    const auto dir = testing::scratch_dir("malformed");
    save_samples(dir / "x.qbs", generate_corpus(testing::tiny_generator(3)).train, 100);
    const std::string good = testing::slurp(dir / "x.qbs");
    // Replaces field `field` of record 1 (file line 3).
    auto corrupt = [&](std::size_t field, const std::string& value) {
        std::string text = good;
        std::size_t line = 0;
        for (int i = 0; i < 2; ++i) line = text.find('\n', line) + 1;
        std::size_t begin = line;
        for (std::size_t f = 0; f < field; ++f) begin = text.find('\t', begin) + 1;
        const std::size_t end = text.find_first_of("\t\n", begin);
        text.replace(begin, end - begin, value);
        std::ofstream(dir / "x.qbs", std::ios::binary | std::ios::trunc) << text;
        return error_of(dir / "x.qbs");
    };
    const std::string question = corrupt(2, "5 z 2");
    EXPECT_NE(question.find("record 1, field 'question'"), std::string::npos) << question;
    const std::string bits = corrupt(4, "1x01");
    EXPECT_NE(bits.find("record 1, field 'informative'"), std::string::npos) << bits;
    const std::string frames = corrupt(1, "3x6:00ff");
    EXPECT_NE(frames.find("record 1, field 'frames'"), std::string::npos) << frames;
}

TEST(Dataset, UnknownVersionIsRefusedWithSupportedList) {
    const auto dir = testing::scratch_dir("version");
    save_samples(dir / "x.qbs", generate_corpus(testing::tiny_generator(3)).train, 100);
    std::string text = testing::slurp(dir / "x.qbs");
    text.replace(text.find(" v1 "), 4, " v9 ");
    std::ofstream(dir / "x.qbs", std::ios::binary | std::ios::trunc) << text;
    const std::string msg = error_of(dir / "x.qbs");
    EXPECT_NE(msg.find("v9"), std::string::npos) << msg;
    EXPECT_NE(msg.find("supported versions: v1"), std::string::npos) << msg;
    EXPECT_THROW(load_samples(dir / "missing.qbs"), DataError);
}

TEST(Dataset, PartitionsAreDisjointById) {
    const Corpus c = generate_corpus(GeneratorConfig{});
    std::set<std::string> ids;
    std::size_t n = 0;
    for (const Sample* s : all_samples(c)) {
        ids.insert(s->id);
        ++n;
    }
    EXPECT_EQ(ids.size(), n);
}

TEST(Dataset, EveryTokenIsInsideTheVocabulary) {
    const Corpus c = generate_corpus(GeneratorConfig{});
    for (const Sample* s : all_samples(c)) {
        for (const auto* seq : {&s->question, &s->translation}) {
            for (int id : seq->ids) {
                EXPECT_GE(id, 0);
                EXPECT_LT(id, static_cast<int>(c.vocab.size()));
            }
        }
        for (std::size_t i = 0; i + 1 < s->translation.size(); ++i) EXPECT_TRUE(c.vocab.is_content(s->translation[i]));
    }
}

// Noise-free frames are split wherever the vector changes and each run is
// labelled with the nearest prototype.
TEST(Dataset, NoiseFreeVideoIsRecoverableByNearestPrototype) {
    GeneratorConfig g;
    g.frame_noise = 0.0;
    g.informativeness = 1.0;
    g.train = 200;
    const Corpus c = generate_corpus(g);
    const auto protos = gesture_prototypes(g);
    for (const Sample* s : all_samples(c)) {
        std::vector<int> decoded;
        const std::size_t d = s->video.frame_dim;
        for (std::size_t f = 0; f < s->video.frames(); ++f) {
            const float* frame = &s->video.values[f * d];
            if (f > 0 && std::equal(frame, frame + d, frame - d)) continue;
            std::size_t best = 0;
            double best_dist = 1e300;
            for (std::size_t p = 0; p < protos.size(); ++p) {
                double dist = 0;
                for (std::size_t k = 0; k < d; ++k) dist += (frame[k] - protos[p][k]) * (frame[k] - protos[p][k]);
                if (dist < best_dist) best_dist = dist, best = p;
            }
            decoded.push_back(c.vocab.content_id(best));
        }
        decoded.push_back(token::kEos);
        ASSERT_EQ(decoded, s->translation.ids) << s->id;
    }
}

TEST(Dataset, InvalidGeneratorConfigIsRejected) {
    GeneratorConfig g;
    g.informativeness = 1.5;
    EXPECT_THROW(generate_corpus(g), ConfigError);
    g = GeneratorConfig{};
    g.min_frames = 0;
    EXPECT_THROW(generate_corpus(g), ConfigError);
    g = GeneratorConfig{};
    g.frame_noise = -1;
    EXPECT_THROW(generate_corpus(g), ConfigError);
}

}  // namespace
}  // namespace qbslt
