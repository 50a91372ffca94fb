// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Drives the qbslt executable end to end on a tiny configuration.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "test_support.hpp"

namespace qbslt {
namespace {

namespace fs = std::filesystem;

std::string cli() {
    const char* path = std::getenv("QBSLT_CLI");
    return path ? path : "qbslt";
}

struct Outcome {
    int code = -1;
    std::string err;
};

Outcome run(const std::string& args, const fs::path& scratch) {
    const fs::path err = scratch / "stderr.txt";
    const std::string cmd = cli() + " " + args + " > " + (scratch / "stdout.txt").string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::slurp(err)};
}

const char* kTinyConfig = R"(# tiny end-to-end run
data.content_vocab = 12
data.distractor_vocab = 6
data.frame_dim = 6
data.categories = 3
data.templates = 4
data.min_length = 2
data.max_length = 4
data.train = 12
data.dev = 4
data.test = 4
model.d_model = 8
model.heads = 2
model.d_ff = 16
model.encoder_layers = 1
model.decoder_layers = 1
stage1.steps = 4
stage1.batch = 4
stage2.epochs = 2
stage2.batch = 4
stage2.max_len = 6
ablate.seeds = 1,2,3
)";

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testing::scratch_dir(std::string("cli-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::ofstream(dir_ / "run.cfg") << kTinyConfig << "data.dir = " << (dir_ / "data").string() << "\n";
    }
    Outcome qbslt(const std::string& args) { return run(args + " -c " + (dir_ / "run.cfg").string(), dir_); }
    std::string read(const fs::path& rel) const { return testing::slurp(dir_ / rel); }
    fs::path dir_;
};

TEST_F(CliTest, PipelineIsByteReproducible) {
    ASSERT_EQ(qbslt("gen-data").code, 0);
    ASSERT_EQ(qbslt("gen-data -o " + (dir_ / "data2").string()).code, 0);
    for (const char* f : {"train.qbs", "dev.qbs", "test.qbs", "vocab.txt"}) {
        EXPECT_EQ(read(fs::path("data") / f), read(fs::path("data2") / f)) << f;
    }
    for (const char* run_name : {"a", "b"}) {
        const std::string rd = " -r " + (dir_ / run_name).string();
        ASSERT_EQ(qbslt("pretrain" + rd).code, 0) << run_name;
        ASSERT_EQ(qbslt("train" + rd).code, 0) << run_name;
        ASSERT_EQ(qbslt("evaluate" + rd).code, 0) << run_name;
    }
    for (const char* f : {"config.txt", "stage1.ckpt", "stage1_loss.log", "stage2.ckpt", "stage2_loss.log",
                          "hyps_test.txt", "metrics_test.txt", "manifest.txt"}) {
        EXPECT_FALSE(read(fs::path("a") / f).empty()) << f;
        EXPECT_EQ(read(fs::path("a") / f), read(fs::path("b") / f)) << f;
    }
    EXPECT_NE(read("a/metrics_test.txt").find("B4="), std::string::npos);

    // A different seed changes the trained weights.
    ASSERT_EQ(qbslt("pretrain --seed 9 -r " + (dir_ / "c").string()).code, 0);
    EXPECT_NE(read("a/stage1.ckpt"), read("c/stage1.ckpt"));
}

TEST_F(CliTest, EvaluateLeavesCheckpointUntouched) {
    ASSERT_EQ(qbslt("gen-data").code, 0);
    const std::string rd = " -r " + (dir_ / "run").string();
    ASSERT_EQ(qbslt("train --cold-start" + rd).code, 0);
    EXPECT_NE(read("run/manifest.txt").find("init=cold-start"), std::string::npos) << read("run/manifest.txt");
    const std::string before = read("run/stage2.ckpt");
    ASSERT_EQ(qbslt("evaluate --split dev" + rd).code, 0);
    EXPECT_EQ(read("run/stage2.ckpt"), before);
    EXPECT_FALSE(read("run/metrics_dev.txt").empty());
}

TEST_F(CliTest, IdenticalDumpsScorePerfectly) {
    std::ofstream(dir_ / "h.txt") << "5 6 7 8 9\n10 11 12 13\n";
    std::ofstream(dir_ / "r.txt") << "5 6 7 8 9\n10 11 12 13\n";
    ASSERT_EQ(run("evaluate --hyps " + (dir_ / "h.txt").string() + " --refs " + (dir_ / "r.txt").string(), dir_).code,
              0);
    const std::string out = read("stdout.txt");
    EXPECT_NE(out.find("B4=1\n"), std::string::npos) << out;
    EXPECT_NE(out.find("ROUGE=1\n"), std::string::npos) << out;
}

TEST_F(CliTest, ExitCodesSeparateErrorKinds) {
    std::ofstream(dir_ / "bad.cfg") << "stage1.stepz = 3\n";
    Outcome bad = run("pretrain -r x -c " + (dir_ / "bad.cfg").string(), dir_);
    EXPECT_EQ(bad.code, 2);
    EXPECT_EQ(bad.err.rfind("error: ConfigError: ", 0), 0u) << bad.err;
    EXPECT_EQ(std::count(bad.err.begin(), bad.err.end(), '\n'), 1);

    ASSERT_EQ(qbslt("gen-data").code, 0);
    const Outcome missing = qbslt("train -r " + (dir_ / "empty").string());
    EXPECT_EQ(missing.code, 3) << missing.err;
    EXPECT_NE(missing.err.find("stage1.ckpt"), std::string::npos);
    EXPECT_EQ(qbslt("evaluate -r " + (dir_ / "empty").string()).code, 3);
    EXPECT_EQ(qbslt("train --mode sideways -r " + (dir_ / "m").string()).code, 2);
    EXPECT_EQ(run("frobnicate", dir_).code, 2);
}

TEST_F(CliTest, RelativeRunDirsResolveUnderRunRoot) {
    ASSERT_EQ(qbslt("gen-data").code, 0);
    ::setenv("QBSLT_RUN_ROOT", (dir_ / "root").string().c_str(), 1);
    const Outcome o = qbslt("pretrain -r rel");
    ::unsetenv("QBSLT_RUN_ROOT");
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_TRUE(fs::exists(dir_ / "root" / "rel" / "stage1.ckpt"));
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

TEST_F(CliTest, HeatmapShapeAndOverride) {
    ASSERT_EQ(qbslt("gen-data").code, 0);
    ASSERT_EQ(qbslt("train --cold-start -r " + (dir_ / "run").string()).code, 0);
    const std::string ckpt = " --checkpoint " + (dir_ / "run" / "stage2.ckpt").string();
    ASSERT_EQ(qbslt("export-heatmap --sample test-00001" + ckpt + " -o " + (dir_ / "h").string()).code, 0);
    const auto samples = load_samples(dir_ / "data" / "test.qbs");
    const Sample& s = samples[1];
    const std::size_t rows = s.question.size() + (s.video.frames() / 2) / 2;
    const auto csv = lines_of(read("h.csv"));
    ASSERT_EQ(csv.size(), 1 + rows + 1);
    EXPECT_EQ(csv[1 + s.question.size()], "-,boundary,,,");

    ASSERT_EQ(qbslt("export-heatmap --sample test-00001 --gate-override 1" + ckpt + " -o " + (dir_ / "ones").string())
                  .code,
              0);
    const auto pgm = lines_of(read("ones.pgm"));
    ASSERT_EQ(pgm.size(), 3 + rows + 1);
    EXPECT_EQ(pgm[0], "P2");
    EXPECT_EQ(pgm[1], "8 " + std::to_string(rows + 1));
    for (std::size_t r = 3; r < pgm.size(); ++r) {
        std::istringstream in(pgm[r]);
        const bool separator = r == 3 + s.question.size();
        int count = 0;
        for (int v; in >> v; ++count) ASSERT_EQ(v, separator ? 0 : 255) << "line " << r;
        EXPECT_EQ(count, 8);
    }
    EXPECT_EQ(qbslt("export-heatmap --sample nope" + ckpt + " -o " + (dir_ / "x").string()).code, 3);
}

TEST_F(CliTest, AblationTableHasOneRowPerArmAndADelta) {
    ASSERT_EQ(qbslt("gen-data").code, 0);
    std::ofstream(dir_ / "run.cfg", std::ios::app) << "ablate.arms = ssaw,concat\nstage2.epochs = 1\n";
    ASSERT_EQ(qbslt("ablate -r " + (dir_ / "abl").string()).code, 0);
    const auto table = lines_of(read("abl/ablation.txt"));
    ASSERT_GE(table.size(), 4u);
    EXPECT_EQ(table[0].rfind("arm", 0), 0u);
    EXPECT_EQ(table[1].rfind("ssaw ", 0), 0u);
    EXPECT_EQ(table[2].rfind("concat ", 0), 0u);
    EXPECT_EQ(table[3].rfind("delta ssaw-concat", 0), 0u);
    for (std::size_t r = 1; r <= 3; ++r) {
        std::istringstream in(table[r].substr(24));
        int cells = 0;
        for (double v; in >> v;) ++cells;
        EXPECT_EQ(cells, 5) << table[r];
    }
    EXPECT_EQ(table[4].find("delta"), std::string::npos);
    EXPECT_NE(read("abl/ablation.txt").find("ssaw.seed3.B4="), std::string::npos);
}

}  // namespace
}  // namespace qbslt
