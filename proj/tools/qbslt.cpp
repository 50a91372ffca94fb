// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// qbslt command line: gen-data, pretrain, train, evaluate, ablate,
// export-heatmap. Errors are reported as one line on stderr,
//   error: <Class>: <message>
// with exit codes 2 (config), 3 (data/checkpoint), 4 (non-finite loss).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qbslt/commands.hpp"
#include "qbslt/errors.hpp"

namespace {

using qbslt::fs::path;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string run_dir;
};

void add_common(CLI::App* cmd, Common& c, bool needs_run_dir) {
    cmd->add_option("-c,--config", c.config_path, "run config file (key = value lines)");
    cmd->add_option("--seed", c.seed, "global seed, overrides the config");
    if (needs_run_dir) {
        cmd->add_option("-r,--run-dir", c.run_dir, "run directory (relative paths resolve under $QBSLT_RUN_ROOT)");
    }
}

qbslt::RunConfig resolve(const Common& c) {
    qbslt::RunConfig config = c.config_path.empty() ? qbslt::RunConfig{} : qbslt::RunConfig::load(c.config_path);
    if (c.seed) config.apply_seed(*c.seed);
    return config;
}

path run_dir(const Common& c) {
    if (c.run_dir.empty()) throw qbslt::ConfigError("--run-dir is required");
    path p(c.run_dir);
    const char* root = std::getenv(qbslt::kRunRootEnv);
    if (p.is_relative() && root && *root) p = path(root) / p;
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qbslt: question-based sign language translation at desk scale"};
    app.require_subcommand(1);

    Common gen, pre, train, eval, ablate, heat;
    std::string data_dir;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common(gen_cmd, gen, false);
    gen_cmd->add_option("-o,--out", data_dir, "corpus directory (overrides data.dir)");

    auto* pre_cmd = app.add_subcommand("pretrain", "stage 1: alignment + masked reconstruction");
    add_common(pre_cmd, pre, true);

    std::string init;
    bool cold_start = false;
    auto* train_cmd = app.add_subcommand("train", "stage 2: fused question-based translation");
    add_common(train_cmd, train, true);
    train_cmd->add_option("--init", init, "stage-1 checkpoint (default <run-dir>/stage1.ckpt)");
    train_cmd->add_flag("--cold-start", cold_start, "skip stage-1 initialisation (recorded in the manifest)");
    std::string mode;
    train_cmd->add_option("--mode", mode, "fusion mode: ssaw|concat|question-only|video-only");

    std::string checkpoint, split = "test", hyp_file, ref_file;
    auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint, or a hypothesis dump against references");
    add_common(eval_cmd, eval, true);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint (default <run-dir>/stage2.ckpt)");
    eval_cmd->add_option("--split", split, "train|dev|test");
    eval_cmd->add_option("--hyps", hyp_file, "hypothesis dump, one sentence of ids per line");
    eval_cmd->add_option("--refs", ref_file, "reference dump, one sentence of ids per line");
    eval_cmd->add_option("--mode", mode, "fusion mode used by the checkpoint");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate every fusion arm over several seeds");
    add_common(ablate_cmd, ablate, true);

    std::string sample_id, out_prefix;
    std::optional<double> gate_override;
    auto* heat_cmd = app.add_subcommand("export-heatmap", "write the SSAW gate map of one sample as CSV and PGM");
    add_common(heat_cmd, heat, false);
    heat_cmd->add_option("--checkpoint", checkpoint, "checkpoint")->required();
    heat_cmd->add_option("--sample", sample_id, "sample id")->required();
    heat_cmd->add_option("--split", split, "train|dev|test");
    heat_cmd->add_option("-o,--out", out_prefix, "output prefix; writes <prefix>.csv and <prefix>.pgm")->required();
    heat_cmd->add_option("--gate-override", gate_override, "replace the gate by a constant (inspection aid)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: UsageError: " << e.what() << '\n';
        return 2;
    }

    try {
        if (gen_cmd->parsed()) {
            auto config = resolve(gen);
            if (!data_dir.empty()) config.data_dir = data_dir;
            qbslt::cmd_gen_data(config, std::cout);
        } else if (pre_cmd->parsed()) {
            qbslt::cmd_pretrain(resolve(pre), run_dir(pre), std::cout);
        } else if (train_cmd->parsed()) {
            auto config = resolve(train);
            if (cold_start) config.cold_start = true;
            if (!mode.empty()) config.stage2.mode = qbslt::parse_fusion_mode(mode);
            qbslt::cmd_train(config, run_dir(train), init.empty() ? std::nullopt : std::optional<path>(init),
                             std::cout);
        } else if (eval_cmd->parsed()) {
            if (!hyp_file.empty() || !ref_file.empty()) {
                if (hyp_file.empty() || ref_file.empty()) throw qbslt::ConfigError("--hyps and --refs go together");
                qbslt::cmd_score_files(hyp_file, ref_file, std::cout);
            } else {
                auto config = resolve(eval);
                if (!mode.empty()) config.stage2.mode = qbslt::parse_fusion_mode(mode);
                qbslt::cmd_evaluate(config, run_dir(eval),
                                    checkpoint.empty() ? std::nullopt : std::optional<path>(checkpoint), split,
                                    std::cout);
            }
        } else if (ablate_cmd->parsed()) {
            qbslt::cmd_ablate(resolve(ablate), run_dir(ablate), std::cout);
        } else if (heat_cmd->parsed()) {
            qbslt::cmd_export_heatmap(resolve(heat), checkpoint, sample_id, split, out_prefix, gate_override,
                                      std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << qbslt::error_class(e) << ": " << e.what() << '\n';
        return qbslt::exit_code_for(e);
    }
    return 0;
}
