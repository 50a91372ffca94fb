// Copyright (c) 2026, The qbslt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qbslt/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qbslt/digest.hpp"
#include "qbslt/errors.hpp"
#include "qbslt/ops.hpp"

namespace qbslt {

namespace {

const char* kMetricNames[5] = {"B1", "B2", "B3", "B4", "ROUGE"};

double metric(const ScoreReport& r, int k) {
    return k < 4 ? r.bleu[k] : r.rouge;
}

void set_metric(ScoreReport& r, int k, double v) {
    if (k < 4) r.bleu[k] = v; else r.rouge = v;
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string join_sentence(const Sentence& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " " : "") + std::to_string(s[i]);
    return out;
}

std::vector<Sentence> read_sentences(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<Sentence> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream words(line);
        Sentence s;
        std::string w;
        while (words >> w) {
            try {
                std::size_t used = 0;
                s.push_back(std::stoi(w, &used));
                if (used != w.size()) throw std::invalid_argument(w);
            } catch (const std::exception&) {
                throw DataError(path.string() + ": line " + std::to_string(number) + ": bad token id '" + w + "'");
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

const std::vector<Sample>& pick_split(const Corpus& corpus, const std::string& split) {
    if (split == "train") return corpus.train;
    if (split == "dev") return corpus.dev;
    if (split == "test") return corpus.test;
    throw ConfigError("unknown split '" + split + "' (expected train|dev|test)");
}

struct Manifest {
    std::vector<std::pair<std::string, std::string>> lines;
    void add(const std::string& key, const std::string& value) { lines.emplace_back(key, value); }
    void add_scores(const std::string& prefix, const ScoreReport& r) {
        for (int k = 0; k < 5; ++k) add(prefix + kMetricNames[k], fmt("%.17g", metric(r, k)));
    }
    void save(const fs::path& path) const {
        std::string text;
        for (const auto& [k, v] : lines) text += k + "=" + v + "\n";
        write_text(path, text);
    }
};

Manifest start_manifest(const std::string& command, const RunConfig& config) {
    Manifest m;
    m.add("command", command);
    m.add("config_digest", config.digest());
    m.add("seed", std::to_string(config.seed));
    return m;
}

std::string file_digest(const fs::path& path) {
    return fnv1a_hex(read_text(path));
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::exists(path)) throw CheckpointError(std::string(what) + " not found: " + path.string());
}

}  // namespace

ModelConfig resolved_model_config(const RunConfig& config, std::size_t vocab_size) {
    ModelConfig m = config.model;
    m.vocab_size = vocab_size;
    m.frame_dim = config.data.frame_dim;
    return m;
}

void copy_parameters(const QbsltModel& from, QbsltModel& to, const std::vector<std::string>& prefixes) {
    for (const auto& e : from.params().entries()) {
        const bool wanted = std::any_of(prefixes.begin(), prefixes.end(),
                                        [&](const std::string& p) { return e.name.starts_with(p); });
        if (wanted) to.params().get(e.name).assign(e.tensor);
    }
}

void cmd_gen_data(const RunConfig& config, std::ostream& out) {
    config.validate();
    const Corpus corpus = generate_corpus(config.data);
    save_corpus(config.data_dir, corpus);
    config.save(fs::path(config.data_dir) / "config.txt");
    out << "wrote " << corpus.train.size() << " train / " << corpus.dev.size() << " dev / " << corpus.test.size()
        << " test samples (vocab " << corpus.vocab.size() << ") to " << config.data_dir << '\n';
}

void cmd_pretrain(const RunConfig& config, const fs::path& run_dir, std::ostream& out) {
    config.validate();
    const Corpus corpus = load_corpus(config.data_dir);
    QbsltModel model(resolved_model_config(config, corpus.vocab.size()));
    fs::create_directories(run_dir);
    config.save(run_dir / "config.txt");
    std::ofstream log(run_dir / "stage1_loss.log", std::ios::trunc);
    log.precision(17);
    const Stage1Report report = train_stage1(model, corpus.train, config.stage1, &log);
    const fs::path ckpt = run_dir / "stage1.ckpt";
    model.params().save(ckpt);

    Manifest m = start_manifest("pretrain", config);
    m.add("data_dir", config.data_dir);
    m.add("output_checkpoint", ckpt.filename().string());
    m.add("output_digest", file_digest(ckpt));
    m.add("steps", std::to_string(config.stage1.steps));
    m.add("retrieval_v2t", fmt("%.17g", report.final.video_to_text));
    m.add("retrieval_t2v", fmt("%.17g", report.final.text_to_video));
    m.save(run_dir / "manifest.txt");
    out << "stage 1: " << config.stage1.steps << " steps, retrieval top-1 v->t " << fmt("%.3f", report.final.video_to_text)
        << " t->v " << fmt("%.3f", report.final.text_to_video) << ", checkpoint " << ckpt.string() << '\n';
}

void cmd_train(const RunConfig& config, const fs::path& run_dir, const std::optional<fs::path>& init,
               std::ostream& out) {
    config.validate();
    const Corpus corpus = load_corpus(config.data_dir);
    QbsltModel model(resolved_model_config(config, corpus.vocab.size()));
    Manifest m = start_manifest("train", config);
    m.add("mode", to_string(config.stage2.mode));
    if (config.cold_start) {
        m.add("init", "cold-start");
    } else {
        const fs::path source = init ? *init : run_dir / "stage1.ckpt";
        require_file(source, "stage-1 checkpoint");
        model.params().load(source, reused_prefixes());
        m.add("init", init ? source.string() : source.filename().string());
        m.add("init_digest", file_digest(source));
    }
    fs::create_directories(run_dir);
    config.save(run_dir / "config.txt");
    std::ofstream log(run_dir / "stage2_loss.log", std::ios::trunc);
    log.precision(17);
    const Stage2Report report = train_stage2(model, corpus.train, corpus.dev, config.stage2, &log);
    const fs::path ckpt = run_dir / "stage2.ckpt";
    model.params().save(ckpt);
    m.add("output_checkpoint", ckpt.filename().string());
    m.add("output_digest", file_digest(ckpt));
    m.add("best_epoch", std::to_string(report.best_epoch));
    m.add("best_dev_B4", fmt("%.17g", report.best_dev_bleu4));
    m.save(run_dir / "manifest.txt");
    out << "stage 2 (" << to_string(config.stage2.mode) << "): best dev BLEU-4 "
        << fmt("%.2f", 100.0 * report.best_dev_bleu4) << " at epoch " << report.best_epoch << ", checkpoint "
        << ckpt.string() << '\n';
}

ScoreReport cmd_evaluate(const RunConfig& config, const fs::path& run_dir, const std::optional<fs::path>& checkpoint,
                         const std::string& split, std::ostream& out) {
    config.validate();
    const Corpus corpus = load_corpus(config.data_dir);
    const auto& samples = pick_split(corpus, split);
    const fs::path ckpt = checkpoint ? *checkpoint : run_dir / "stage2.ckpt";
    require_file(ckpt, "checkpoint");
    QbsltModel model(resolved_model_config(config, corpus.vocab.size()));
    model.params().load(ckpt);
    const auto hyps = translate(model, samples, config.stage2.mode, config.stage2.max_len);
    const ScoreReport report = score_corpus(hyps, references(samples));

    fs::create_directories(run_dir);
    std::string dump;
    for (std::size_t i = 0; i < samples.size(); ++i) dump += samples[i].id + "\t" + join_sentence(hyps[i]) + "\n";
    write_text(run_dir / ("hyps_" + split + ".txt"), dump);
    write_text(run_dir / ("metrics_" + split + ".txt"), metric_lines(report));
    out << format_report(report);
    return report;
}

ScoreReport cmd_score_files(const fs::path& hyps, const fs::path& refs, std::ostream& out) {
    const auto h = read_sentences(hyps);
    const auto r = read_sentences(refs);
    if (h.size() != r.size()) {
        throw DataError("hypothesis dump has " + std::to_string(h.size()) + " lines, reference dump " +
                        std::to_string(r.size()));
    }
    const ScoreReport report = score_corpus(h, r);
    out << format_report(report) << metric_lines(report);
    return report;
}

ScoreReport median_report(const std::vector<ScoreReport>& reports) {
    if (reports.empty()) throw DataError("median of no reports");
    ScoreReport out;
    out.sentences = reports.front().sentences;
    for (int k = 0; k < 5; ++k) {
        std::vector<double> v;
        for (const auto& r : reports) v.push_back(metric(r, k));
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        set_metric(out, k, n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
    }
    return out;
}

std::string format_ablation_table(const std::vector<ArmResult>& arms) {
    auto row = [](const std::string& label, auto value_of) {
        std::string line = label;
        line.resize(std::max<std::size_t>(line.size() + 1, 24), ' ');
        for (int k = 0; k < 5; ++k) {
            std::string cell = fmt("%.2f", value_of(k));
            line += std::string(cell.size() < 8 ? 8 - cell.size() : 1, ' ') + cell;
        }
        return line + "\n";
    };
    std::string out = "arm";
    out.resize(24, ' ');
    for (const char* name : kMetricNames) {
        std::string cell = name;
        out += std::string(8 - cell.size(), ' ') + cell;
    }
    out += "\n";
    for (const auto& a : arms) out += row(to_string(a.mode), [&](int k) { return 100.0 * metric(a.median, k); });
    for (std::size_t j = 1; j < arms.size(); ++j) {
        out += row("delta " + to_string(arms[0].mode) + "-" + to_string(arms[j].mode),
                   [&](int k) { return 100.0 * (metric(arms[0].median, k) - metric(arms[j].median, k)); });
    }
    return out;
}

AblationResult run_ablation(const RunConfig& config, const Corpus& corpus, const std::optional<fs::path>& run_dir,
                            std::ostream* progress) {
    config.validate();
    AblationResult result;
    for (auto mode : config.ablate_arms) result.arms.push_back({mode, {}, {}, {}, {}, 0.0});
    using Clock = std::chrono::steady_clock;
    auto elapsed = [](Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); };
    for (const auto seed : config.ablate_seeds) {
        RunConfig seeded = config;
        seeded.model.seed = seed;
        seeded.stage1.seed = seed;
        seeded.stage2.seed = seed;
        const ModelConfig mc = resolved_model_config(seeded, corpus.vocab.size());
        QbsltModel pretrained(mc);
        if (!config.cold_start) {
            const auto t1 = Clock::now();
            const Stage1Report r1 = train_stage1(pretrained, corpus.train, seeded.stage1);
            if (progress) {
                *progress << "seed " << seed << " stage 1: retrieval v->t " << fmt("%.3f", r1.final.video_to_text)
                          << " t->v " << fmt("%.3f", r1.final.text_to_video) << '\n';
            }
            result.stage1_seconds += elapsed(t1);
            if (run_dir) pretrained.params().save(*run_dir / ("seed-" + std::to_string(seed)) / "stage1.ckpt");
        }
        for (auto& arm : result.arms) {
            const auto t2 = Clock::now();
            QbsltModel model(mc);
            copy_parameters(pretrained, model, reused_prefixes());
            Stage2Config s2 = seeded.stage2;
            s2.mode = arm.mode;
            const Stage2Report r2 = train_stage2(model, corpus.train, corpus.dev, s2);
            const ScoreReport test = evaluate_translation(model, corpus.test, arm.mode, s2.max_len);
            arm.per_seed.push_back(test);
            arm.training.push_back(r2);
            if (arm.mode == FusionMode::kSsaw) arm.gates.push_back(split_gate_summary(model, corpus.test));
            arm.seconds += elapsed(t2);
            if (progress) {
                *progress << "seed " << seed << " arm " << to_string(arm.mode) << ": dev B4 "
                          << fmt("%.2f", 100.0 * r2.best_dev_bleu4) << " test B4 " << fmt("%.2f", 100.0 * test.bleu[3])
                          << '\n';
            }
        }
    }
    for (auto& arm : result.arms) arm.median = median_report(arm.per_seed);
    result.table = format_ablation_table(result.arms);
    return result;
}

AblationResult cmd_ablate(const RunConfig& config, const fs::path& run_dir, std::ostream& out) {
    config.validate();
    const Corpus corpus = load_corpus(config.data_dir);
    fs::create_directories(run_dir);
    config.save(run_dir / "config.txt");
    AblationResult result = run_ablation(config, corpus, run_dir, &out);

    std::string text = result.table;
    for (const auto& arm : result.arms) {
        for (std::size_t s = 0; s < arm.per_seed.size(); ++s) {
            for (int k = 0; k < 5; ++k) {
                text += to_string(arm.mode) + ".seed" + std::to_string(config.ablate_seeds[s]) + "." + kMetricNames[k] +
                        "=" + fmt("%.17g", metric(arm.per_seed[s], k)) + "\n";
            }
        }
        for (int k = 0; k < 5; ++k) {
            text += to_string(arm.mode) + ".median." + kMetricNames[k] + "=" + fmt("%.17g", metric(arm.median, k)) + "\n";
        }
    }
    write_text(run_dir / "ablation.txt", text);
    Manifest m = start_manifest("ablate", config);
    for (const auto& arm : result.arms) m.add_scores(to_string(arm.mode) + ".median.", arm.median);
    m.save(run_dir / "manifest.txt");
    out << result.table;
    return result;
}

std::string format_report(const ScoreReport& report) {
    std::string out = "sentences  " + std::to_string(report.sentences) + "\n";
    for (int k = 0; k < 5; ++k) {
        std::string name = kMetricNames[k];
        name.resize(11, ' ');
        out += name + fmt("%.2f", 100.0 * metric(report, k)) + "\n";
    }
    return out;
}

std::string metric_lines(const ScoreReport& report) {
    std::string out;
    for (int k = 0; k < 5; ++k) out += std::string(kMetricNames[k]) + "=" + fmt("%.17g", metric(report, k)) + "\n";
    out += "sentences=" + std::to_string(report.sentences) + "\n";
    return out;
}

void write_heatmap_csv(const fs::path& path, const FusionOutput& fusion, const Sample& sample, const Vocabulary& vocab) {
    const auto gates = row_mean_gate(fusion);
    std::string text = "row,segment,token,informative,mean_gate\n";
    for (std::size_t i = 0; i < gates.size(); ++i) {
        if (i == fusion.boundary) text += "-,boundary,,,\n";
        const bool question = i < fusion.boundary;
        std::string token = question ? vocab.surface(sample.question[i]) : "frame" + std::to_string(i - fusion.boundary);
        text += std::to_string(i) + "," + (question ? "question" : "video") + "," + token + "," +
                (question ? (sample.informative[i] ? "1" : "0") : "") + "," + fmt("%.17g", gates[i]) + "\n";
    }
    write_text(path, text);
}

void write_heatmap_pgm(const fs::path& path, const FusionOutput& fusion) {
    const std::size_t rows = fusion.gate.dim(0), cols = fusion.gate.dim(1);
    std::string text = "P2\n" + std::to_string(cols) + " " + std::to_string(rows + 1) + "\n255\n";
    auto emit_row = [&](auto value_of) {
        for (std::size_t c = 0; c < cols; ++c) text += (c ? " " : "") + std::to_string(value_of(c));
        text += "\n";
    };
    for (std::size_t r = 0; r < rows; ++r) {
        if (r == fusion.boundary) emit_row([](std::size_t) { return 0L; });
        emit_row([&](std::size_t c) { return std::lround(255.0 * fusion.gate.at(r, c)); });
    }
    write_text(path, text);
}

void cmd_export_heatmap(const RunConfig& config, const fs::path& checkpoint, const std::string& sample_id,
                        const std::string& split, const fs::path& out_prefix, std::optional<double> gate_override,
                        std::ostream& out) {
    config.validate();
    const Corpus corpus = load_corpus(config.data_dir);
    const auto& samples = pick_split(corpus, split);
    const auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.id == sample_id; });
    if (it == samples.end()) throw DataError("unknown sample id '" + sample_id + "' in split " + split);
    require_file(checkpoint, "checkpoint");
    QbsltModel model(resolved_model_config(config, corpus.vocab.size()));
    model.params().load(checkpoint);
    model.set_training(false);
    model.ssaw.set_gate_override(gate_override);
    FusionOutput fusion;
    {
        NoGradGuard no_grad;
        encode_fused(model, *it, FusionMode::kSsaw, &fusion);
    }
    const fs::path csv = out_prefix.string() + ".csv";
    const fs::path pgm = out_prefix.string() + ".pgm";
    write_heatmap_csv(csv, fusion, *it, corpus.vocab);
    write_heatmap_pgm(pgm, fusion);
    std::vector<bool> special(it->question.size());
    for (std::size_t i = 0; i < special.size(); ++i) special[i] = is_special(it->question[i]);
    const GateSummary g = gate_summary(fusion, it->informative, special);
    out << "gate means: informative " << fmt("%.4f", g.informative) << " distractor " << fmt("%.4f", g.distractor)
        << " video " << fmt("%.4f", g.video) << "\nwrote " << csv.string() << " and " << pgm.string() << '\n';
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericError*>(&e)) return 4;
    return 1;
}

std::string error_class(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const CheckpointError*>(&e)) return "CheckpointError";
    if (dynamic_cast<const DataError*>(&e)) return "DataError";
    if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
    if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
    return "InternalError";
}

}  // namespace qbslt
