// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Implementations behind the qbslt subcommands. Each writes its artifacts
// into a run directory together with the resolved config and a manifest.
//
// Run directory files:
//   config.txt            resolved RunConfig
//   manifest.txt          key=value lines: command, config digest, seeds,
//                         checkpoint lineage, final metrics
//   stage1.ckpt / stage1_loss.log      (pretrain)   "step L_sim L_R"
//   stage2.ckpt / stage2_loss.log      (train)      "step L_D L_S L_total"
//   metrics_<split>.txt / hyps_<split>.txt            (evaluate)
//   ablation.txt                                      (ablate)

#pragma once

#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qbslt/config.hpp"

namespace qbslt {

namespace fs = std::filesystem;

inline constexpr const char* kRunRootEnv = "QBSLT_RUN_ROOT";

/// Model config for a corpus with the given vocabulary size.
ModelConfig resolved_model_config(const RunConfig& config, std::size_t vocab_size);

/// Copies every parameter whose name starts with one of `prefixes`.
void copy_parameters(const QbsltModel& from, QbsltModel& to, const std::vector<std::string>& prefixes);

void cmd_gen_data(const RunConfig& config, std::ostream& out);
void cmd_pretrain(const RunConfig& config, const fs::path& run_dir, std::ostream& out);
/// `init` overrides the stage-1 checkpoint (default run_dir/stage1.ckpt).
void cmd_train(const RunConfig& config, const fs::path& run_dir, const std::optional<fs::path>& init,
               std::ostream& out);
/// `checkpoint` defaults to run_dir/stage2.ckpt.
ScoreReport cmd_evaluate(const RunConfig& config, const fs::path& run_dir, const std::optional<fs::path>& checkpoint,
                         const std::string& split, std::ostream& out);
/// Scores a hypothesis dump against a reference dump (one sentence of ids per line).
ScoreReport cmd_score_files(const fs::path& hyps, const fs::path& refs, std::ostream& out);

struct ArmResult {
    FusionMode mode;
    std::vector<ScoreReport> per_seed;
    std::vector<GateSummary> gates;  // SSAW arm only
    std::vector<Stage2Report> training;
    ScoreReport median;
    double seconds = 0.0;  // wall time of stage 2 and scoring, all seeds
};

struct AblationResult {
    std::vector<ArmResult> arms;
    std::string table;
    double stage1_seconds = 0.0;
};

/// Trains and evaluates every arm over every seed on one shared corpus.
/// Stage 1 runs once per seed and initialises all arms of that seed.
AblationResult run_ablation(const RunConfig& config, const Corpus& corpus, const std::optional<fs::path>& run_dir,
                            std::ostream* progress);
AblationResult cmd_ablate(const RunConfig& config, const fs::path& run_dir, std::ostream& out);

/// Median per metric over seeds.
ScoreReport median_report(const std::vector<ScoreReport>& reports);
std::string format_ablation_table(const std::vector<ArmResult>& arms);

std::string format_report(const ScoreReport& report);
/// "metric=value" lines.
std::string metric_lines(const ScoreReport& report);

/// CSV: one row per fused position plus one boundary marker row.
void write_heatmap_csv(const fs::path& path, const FusionOutput& fusion, const Sample& sample, const Vocabulary& vocab);
/// ASCII PGM, d_model columns by (M + 1 + N') rows; brightness = round(255 * gate),
/// with an all-black separator row between question and video rows.
void write_heatmap_pgm(const fs::path& path, const FusionOutput& fusion);
void cmd_export_heatmap(const RunConfig& config, const fs::path& checkpoint, const std::string& sample_id,
                        const std::string& split, const fs::path& out_prefix, std::optional<double> gate_override,
                        std::ostream& out);

/// Process exit code for an exception: 2 config, 3 data, 4 numeric, 1 other.
int exit_code_for(const std::exception& e);
/// Machine-parsable class name used in the single-line error report.
std::string error_class(const std::exception& e);

}  // namespace qbslt
